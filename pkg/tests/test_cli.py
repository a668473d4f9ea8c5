import csv
import json

import pytest

from h2cqm.cli import CSV_SCHEMA, main


def _read_csv(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# schema=")
    return lines[0], list(csv.DictReader(lines[1:]))


def test_compress_json_with_oracle(tmp_path, capsys):
    rc = main(["compress", "--sphere", "1", "--steps", "8", "--order", "3", "--oracle", "--threads", "1",
               "--out", str(tmp_path), "--dump", str(tmp_path / "f.bin")])
    assert rc == 0
    data = json.loads((tmp_path / "compress.json").read_text())
    assert data["M"] == 80 and data["N"] == 8 and data["error"] <= 5e-2
    assert data["dense_units"] == 80 * 80 * 8
    assert (tmp_path / "f.bin").exists()
    assert json.loads(capsys.readouterr().out)["max_rank"] == data["max_rank"]


def test_deterministic_apart_from_timings(tmp_path):
    outs = []
    for k in range(2):
        d = tmp_path / str(k)
        main(["compress", "--sphere", "0", "--steps", "4", "--threads", "1", "--out", str(d)])
        data = json.loads((d / "compress.json").read_text())
        outs.append({k: v for k, v in data.items() if not k.startswith("time") and k != "wall_time"})
    assert outs[0] == outs[1]


@pytest.mark.parametrize("flags", [["--radius", "1.5"], ["--eps", "0"], ["--nmin", "1"], ["--steps", "0"], ["--eta", "-1"]])
def test_usage_errors(flags, tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["compress", "--sphere", "0", "--out", str(tmp_path)] + flags)
    assert exc.value.code == 2


def test_oracle_refused(tmp_path, capsys):
    rc = main(["compress", "--sphere", "4", "--steps", "64", "--oracle", "--out", str(tmp_path)])
    assert rc == 3
    assert "refused" in capsys.readouterr().err


def test_solve_outputs(tmp_path):
    rc = main(["solve", "--sphere", "1", "--steps", "10", "--order", "3", "--oracle", "--threads", "1",
               "--out", str(tmp_path)])
    assert rc == 0
    summary = json.loads((tmp_path / "solve.json").read_text())
    t = summary["timings"]
    assert set(t) == {"assembly", "inversion", "marching"}
    assert all(v >= 0 for v in t.values()) and sum(t.values()) <= summary["wall_time"]
    header, rows = _read_csv(tmp_path / "steps.csv")
    assert header == "# schema=h2cqm-steps version=1"
    assert len(rows) == 11 and list(rows[0]) == CSV_SCHEMA["steps"][2]
    assert 0.5 <= summary["deviation"]["min"] <= summary["deviation"]["max"] <= 2.0


def test_solve_zero_data(tmp_path):
    main(["solve", "--sphere", "0", "--steps", "4", "--data", "zero", "--out", str(tmp_path)])
    _, rows = _read_csv(tmp_path / "steps.csv")
    assert all(float(r["norm_q"]) == 0.0 and float(r["l2_error"]) == 0.0 for r in rows)


def test_bench_rows_and_empty_sweep(tmp_path):
    main(["bench", "--sphere", "0", "1", "--eps", "1e-2", "1e-3", "--steps", "4", "--out", str(tmp_path / "a")])
    _, rows = _read_csv(tmp_path / "a" / "bench.csv")
    assert len(rows) == 4
    assert {r["M"] for r in rows} == {"20", "80"}
    main(["bench", "--eps", "--out", str(tmp_path / "b")])
    lines = (tmp_path / "b" / "bench.csv").read_text().splitlines()
    assert len(lines) == 2 and lines[0] == "# schema=h2cqm-bench version=1"


def test_mesh_file_input(tmp_path, data_dir):
    rc = main(["compress", "--mesh", str(data_dir / "cube.off"), "--steps", "4", "--out", str(tmp_path)])
    assert rc == 0
    assert json.loads((tmp_path / "compress.json").read_text())["M"] == 12


def test_missing_mesh_file(tmp_path, capsys):
    assert main(["compress", "--mesh", str(tmp_path / "none.off"), "--out", str(tmp_path)]) == 1
