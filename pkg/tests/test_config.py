import numpy as np
import pytest

from licfg.config import ConfigError, parse_config, parse_config_text, render_config


def test_minimal_file_gives_table_defaults(tmp_path):
    (tmp_path / "c.cfg").write_text("dataset = ring\n")
    cfg = parse_config(tmp_path / "c.cfg")
    t = cfg.train
    assert (t.batch_size, t.disc_updates, t.n_gen, t.m_steps) == (64, 1, 640, 15)
    assert (t.penalty.kind, t.penalty.gamma, t.penalty.eps_norm) == ("eps", 0.1, 0.3)
    assert cfg.dataset == "ring"


def test_type_error_reports_line():
    with pytest.raises(ConfigError, match="expected number at line 3"):
        parse_config_text("[penalty]\nkind = zero\ngamma = high\n")


def test_unknown_key():
    with pytest.raises(ConfigError, match="unknown key 'unknown_key'"):
        parse_config_text("unknown_key = 1\n")
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config_text("[data]\ngamma = 1\n")


def test_other_errors(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        parse_config(tmp_path / "nope.cfg")
    with pytest.raises(ConfigError, match="unknown section"):
        parse_config_text("[model]\n")
    with pytest.raises(ConfigError, match="penalty kind"):
        parse_config_text("kind = two\n")
    with pytest.raises(ConfigError, match="unknown dataset"):
        parse_config_text("dataset = spiral\n")
    with pytest.raises(ConfigError, match="m_steps"):
        parse_config_text("M = 0\n")


def test_sections_aliases_and_comments():
    text = """
    # Table symbols
    [train]
    B = 32        ; batch
    U = 2
    N = 128
    M = 5
    eta = 1e-3
    g_hidden = 32, 32
    [penalty]
    kind = one
    gamma = 10
    epsilon_prime = 1
    [nsize]
    seeds = 3,4,5
    [output]
    timing = yes
    """
    cfg = parse_config_text(text)
    t = cfg.train
    assert (t.batch_size, t.disc_updates, t.n_gen, t.m_steps, t.lr) == (32, 2, 128, 5, 1e-3)
    assert t.g_hidden == (32, 32)
    assert (t.penalty.kind, t.penalty.gamma, t.penalty.eps_norm) == ("one", 10.0, 1.0)
    assert cfg.nsize.seeds == (3, 4, 5) and cfg.output.timing is True


def test_render_round_trip():
    cfg = parse_config_text("[train]\nepochs = 7\ng_lr = 0.002\n[penalty]\nkind = zero\ngamma = 0.3\n[data]\ndataset = grid\n")
    again = parse_config_text(render_config(cfg))
    assert again == cfg
