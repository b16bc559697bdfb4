import csv
import json
import math

import numpy as np
import pytest

from dbar_solver.cauchy_transform import GridField, PolarGrid
from dbar_solver.config import DEFAULT_CONFIG, RunConfig, load_config, save_config
from dbar_solver.errors import InputFormatError
from dbar_solver.io_formats import (
    canonical_json,
    load_sequence,
    parse_sequence,
    save_grid_field,
    write_level_csv,
    write_solution,
)


# ==============================================================================
# RunConfig
# ==============================================================================

class TestRunConfig:
    def test_unknown_field_is_named(self):
        with pytest.raises(InputFormatError, match="bogus"):
            RunConfig.from_dict({"eps": 0.1, "bogus": 1}, where="cfg.json")

    def test_not_an_object(self):
        with pytest.raises(InputFormatError, match="JSON object"):
            RunConfig.from_dict([1, 2])

    @pytest.mark.parametrize("changes, name", [
        ({"eps": 2.0}, "eps"),
        ({"radius": -1.0}, "radius"),
        ({"delta": 1.5}, "delta"),
        ({"nu": 0.5}, "nu"),
        ({"grid_nr": 0}, "grid_nr"),
        ({"contour_q": 4}, "contour_q"),
        ({"interpolation": "cubic"}, "interpolation"),
        ({"density": {"kind": "gaussian"}}, "density.kind"),
        ({"density": {"kind": "file"}}, "density.path"),
        ({"anchors": []}, "anchors"),
    ])
    def test_bad_field_is_named(self, changes, name):
        with pytest.raises(InputFormatError, match=name):
            RunConfig.from_dict(changes)

    def test_override_skips_none(self):
        cfg = RunConfig()
        assert cfg.override(seed=None, grid_nr=None) is cfg

        changed = cfg.override(seed=7)
        assert changed.seed == 7
        assert cfg.seed == 0
        assert changed.digest != cfg.digest

    def test_override_validates(self):
        with pytest.raises(InputFormatError):
            RunConfig().override(eps=0.0)

    def test_digest_is_stable(self):
        assert RunConfig().digest == RunConfig().digest
        assert len(RunConfig().digest) == 64

    def test_sample_counts_default_to_the_full_run(self):
        cfg = RunConfig()
        assert (cfg.n_fields, cfg.n_sequences, cfg.n_split, cfg.n_basis, cfg.n_triples) == (50, 100, 50, 10, 20)
        assert cfg.oracle_grids == [256, 512]
        assert cfg.ladder == [64, 128, 256, 512]

    @pytest.mark.parametrize("changes, name", [
        ({"n_sequences": 0}, "n_sequences"),
        ({"ladder": []}, "ladder"),
        ({"oracle_grids": [64, 0]}, "oracle_grids"),
    ])
    def test_bad_counts_are_named(self, changes, name):
        with pytest.raises(InputFormatError, match=name):
            RunConfig.from_dict(changes)

    def test_pipeline_objects(self):
        cfg = RunConfig(grid_nr=8, grid_ntheta=12, contour_q=32, nmax=8, parallel=2)
        opts = cfg.to_options()
        assert (opts.n_r, opts.n_theta, opts.contour_q, opts.nmax) == (8, 12, 32, 8)
        assert opts.quadrature.parallel == 2

        region = cfg.region()
        assert region.anchors.tolist() == [0j]
        assert region.radii.tolist() == [cfg.radius]
        assert cfg.chain().points.tolist() == [0j]


class TestBuildDensity:
    def test_zero(self):
        f = RunConfig(density={"kind": "zero"}).build_density()
        assert f.sup_norm() == 0.0

    def test_indicator_ignores_value(self):
        f = RunConfig(density={"kind": "indicator", "value": [3.0, 0.0]}).build_density()
        assert f.sup_norm() == pytest.approx(1.0)

    def test_constant_value_broadcast(self):
        f = RunConfig(dim=2, density={"kind": "constant", "value": [1.0, 2.0]}).build_density()
        assert f.dim == 2
        np.testing.assert_allclose(f(np.array([0j]))[0], [1 + 2j, 1 + 2j])
        assert f.sup_norm() == pytest.approx(math.sqrt(10.0))

    def test_constant_value_per_component(self):
        f = RunConfig(dim=2, density={"kind": "constant", "value": [[1.0, 0.0], [0.0, 1.0]]}).build_density()
        np.testing.assert_allclose(f(np.array([0j]))[0], [1.0, 1j])

    def test_bad_value(self):
        cfg = RunConfig(dim=2, density={"kind": "constant", "value": [[1, 0], [2, 0], [3, 0]]})
        with pytest.raises(InputFormatError, match="density.value"):
            cfg.build_density()

    def test_bump_is_smooth_and_supported(self):
        f = RunConfig(density={"kind": "bump", "value": [2.0, 0.0]}).build_density()
        values = f(np.array([0j, 0.5, 0.99]))[:, 0]
        assert values[0] == pytest.approx(2.0)
        np.testing.assert_allclose(values[1:], 0.0)

    def test_zero_off_support(self):
        f = RunConfig(density={"kind": "smooth"}).build_density()
        np.testing.assert_allclose(f(np.array([0j, 0.5]))[:, 0], [1.0, 0.0])

    def test_file(self, tmp_path):
        grid = PolarGrid(4, 8, 0.5)
        path = str(tmp_path / "field.json")
        save_grid_field(GridField.sample(lambda z: np.full(z.shape, 2.0), grid), path)

        f = RunConfig(density={"kind": "file", "path": path}).build_density()
        assert f.sup_norm() == pytest.approx(2.0)

        with pytest.raises(InputFormatError, match="dim"):
            RunConfig(dim=2, density={"kind": "file", "path": path}).build_density()


class TestConfigFiles:
    def test_none_is_default(self):
        assert load_config(None) is DEFAULT_CONFIG

    def test_saved_config_loads_back(self, tmp_path):
        cfg = RunConfig(eps=1e-3, seed=5, density={"kind": "smooth"})
        path = str(tmp_path / "nested" / "run.json")
        save_config(cfg, path)
        assert load_config(path).digest == cfg.digest

    def test_bad_json_reports_line(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{\n  "eps": 0.1,\n}\n', encoding="utf-8")
        with pytest.raises(InputFormatError, match="line 3"):
            load_config(str(path))

    def test_missing_file(self, tmp_path):
        with pytest.raises(InputFormatError, match="nope.json"):
            load_config(str(tmp_path / "nope.json"))


# ==============================================================================
# Sequences
# ==============================================================================

class TestParseSequence:
    def test_valid(self):
        seq = parse_sequence([[0, 0], [0.5, -0.25]])
        assert seq.points.tolist() == [0j, 0.5 - 0.25j]

    @pytest.mark.parametrize("data, message", [
        ({"z": 1}, "JSON array"),
        ([], "empty"),
        ([[0, 0], [0.1]], "item 1 is not a"),
        ([[0, 0], [0.1, "x"]], "item 1, field 'im'"),
        ([["x", 0]], "item 0, field 're'"),
        ([[0.6, 0.8]], "not inside the unit disk"),
        ([[0, 0], [0.1, 0], [0, 0]], "item 2 repeats item 0"),
        ([[float("nan"), 0]], "not finite"),
    ])
    def test_rejects(self, data, message):
        with pytest.raises(InputFormatError, match=message):
            parse_sequence(data, where="zeros.json")

    def test_load_bad_json(self, tmp_path):
        path = tmp_path / "zeros.json"
        path.write_text("[[0, 0],\n [0.1, 0]\n", encoding="utf-8")
        with pytest.raises(InputFormatError, match="line"):
            load_sequence(str(path))


# ==============================================================================
# Output formats
# ==============================================================================

class TestOutputs:
    def test_canonical_json(self):
        text = canonical_json({"b": np.float64(1.5), "a": [1 + 2j], "c": np.array([1, 2]), "d": float("inf")})
        data = json.loads(text)
        assert list(data) == ["a", "b", "c", "d"]
        assert data["a"] == [[1.0, 2.0]]
        assert data["c"] == [1, 2]
        assert data["d"] == "inf"
        assert canonical_json({"b": 1, "a": 2}) == canonical_json({"a": 2, "b": 1})

    def test_write_solution(self, tmp_path):
        z = np.array([0.1 + 0.2j, -0.3j])
        values = np.array([[1 + 1j, 2.0], [0.0, -1j]])
        csv_path = str(tmp_path / "out" / "solution.csv")
        json_path = str(tmp_path / "out" / "solution.json")
        write_solution(z, values, csv_path, json_path)

        with open(csv_path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["re", "im", "re_0", "im_0", "re_1", "im_1"]
        assert len(rows) == 3
        assert [float(x) for x in rows[1]] == [0.1, 0.2, 1.0, 1.0, 2.0, 0.0]

        with open(json_path, encoding="utf-8") as fh:
            data = json.load(fh)
        assert data["points"] == [[0.1, 0.2], [0.0, -0.3]]
        assert data["values"][1] == [[0.0, 0.0], [0.0, -1.0]]

    def test_write_level_csv(self, tmp_path):
        path = str(tmp_path / "levels.csv")
        write_level_csv(np.array([0.5j]), np.array([0.25]), path)
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        assert rows == [["re", "im", "abs_b"], ["0.0", "0.5", "0.25"]]
