import pytest

from sfca.config import ConfigError, RunConfig, dump_config, from_mapping, load_config


def test_empty_file_gives_defaults(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text("")
    cfg = load_config(p)
    assert cfg == RunConfig()
    assert len(cfg.model_specs()) == 12 and len(cfg.problems()) == 12


def test_dotted_keys(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text('seed = 3\ndecode.penalty = 0.1\nmodel.c-tree-bag.n_trees = 7\n'
                 'evaluate.methods = ["ols", "c-tree(bg)"]\n')
    cfg = load_config(p)
    assert cfg.seed == 3 and cfg.decode.penalty == 0.1
    spec = cfg.model_spec("c-tree(bg)")
    assert spec.n_trees == 7 and spec.seed == 3


@pytest.mark.parametrize("doc", [
    {"grid": {"segments": 96}},
    {"bogus": 1},
    {"model": {"nn": {"lam": 1.0}}},
    {"model": {"ridge": {"alpha": 1.0}}},
])
def test_unknown_keys_rejected(doc):
    with pytest.raises(ConfigError, match="unknown"):
        from_mapping(doc)


@pytest.mark.parametrize("doc", [
    {"seed": "1"}, {"smoothing": {"robust": 1}}, {"grid": {"segments_per_day": 96.0}},
    {"evaluate": {"methods": "ols"}}, {"decode": {"wavelet": 8}},
])
def test_type_errors(doc):
    with pytest.raises(ConfigError, match="expected"):
        from_mapping(doc)


@pytest.mark.parametrize("doc", [
    {"grid": {"segments_per_day": 48}}, {"evaluate": {"methods": ["nope"]}},
    {"evaluate": {"n_jobs": 0}}, {"report": {"formats": ["pdf"]}}, {"synth": {"cities": 2}},
])
def test_semantic_errors(doc):
    with pytest.raises(ConfigError):
        from_mapping(doc)


def test_int_promotes_to_float():
    assert from_mapping({"decode": {"penalty": 1}}).decode.penalty == 1.0


def test_dump_roundtrip(tmp_path):
    cfg = from_mapping({"seed": 9, "model": {"ridge": {"lam": 2.5}}, "paths": {"data": 'd "q"'}})
    p = tmp_path / "c.toml"
    p.write_text(dump_config(cfg))
    assert load_config(p) == cfg


def test_unreadable_and_malformed(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.toml")
    p = tmp_path / "c.toml"
    p.write_text("seed = = 1")
    with pytest.raises(ConfigError):
        load_config(p)
