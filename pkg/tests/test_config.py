import pytest

from planloc.config import load_config
from planloc.errors import ConfigurationError
from planloc.osm.classes import KIND_LINE, load_class_table


class TestLoadConfig:
    def test_defaults_without_file(self):
        cfg = load_config(None)
        assert cfg.encoder.n == 8
        assert cfg.encoder.rho_m == 4.0
        assert cfg.encoder.projection == "orthonormal"
        assert cfg.encoder.blocked_area_classes == ("building", "water")
        assert cfg.noise == (0.0, 0.0)
        assert (cfg.bev.l, cfg.bev.d, cfg.bev.delta) == (64, 64, 0.5)
        assert (cfg.bev.f, cfg.bev.s) == (256.0, 32)
        assert (cfg.bev.sigma_min, cfg.bev.sigma_max) == (2.0, 512.0)
        assert cfg.world.extent_m == 128.0
        assert cfg.table.digest() == load_class_table().digest()

    def test_overrides(self, tmp_path):
        ini = tmp_path / "pipeline.ini"
        ini.write_text(
            "[encoder]\n"
            "n = 4\n"
            "seed = 9\n"
            "projection = identity\n"
            "blocked = building\n"
            "[noise]\n"
            "sigma_n = 0.25\n"
            "dropout = 0.1\n"
            "[bev]\n"
            "l = 32\n"
            "d = 16\n"
            "f = 128.0\n"
            "[world]\n"
            "extent_m = 64.0\n"
            "tree_density = 0\n"
        )
        cfg = load_config(str(ini))
        assert cfg.encoder.n == 4 and cfg.encoder.seed == 9
        assert cfg.encoder.projection == "identity"
        assert cfg.encoder.blocked_area_classes == ("building",)
        assert cfg.noise == (0.25, 0.1)
        assert (cfg.bev.l, cfg.bev.d, cfg.bev.f) == (32, 16, 128.0)
        assert cfg.bev.delta == 0.5  # untouched keys keep defaults
        assert cfg.world.extent_m == 64.0 and cfg.world.tree_density == 0.0

    def test_bad_value(self, tmp_path):
        ini = tmp_path / "bad.ini"
        ini.write_text("[bev]\nl = many\n")
        with pytest.raises(ConfigurationError, match=r"\[bev\] l: cannot parse 'many'"):
            load_config(str(ini))

    def test_unknown_projection(self, tmp_path):
        ini = tmp_path / "bad.ini"
        ini.write_text("[encoder]\nprojection = random\n")
        with pytest.raises(ConfigurationError, match="unknown projection 'random'"):
            load_config(str(ini))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError, match="cannot read config file"):
            load_config(str(tmp_path / "absent.ini"))

    def test_classes_path(self, tmp_path):
        table = load_class_table()
        custom = tmp_path / "classes.txt"
        custom.write_text(table.serialize())
        ini = tmp_path / "pipeline.ini"
        ini.write_text(f"[classes]\npath = {custom}\n")
        cfg = load_config(str(ini))
        assert cfg.table.class_index(KIND_LINE, "road") == table.class_index(
            KIND_LINE, "road")
