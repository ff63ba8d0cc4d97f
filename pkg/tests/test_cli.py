import json

import pytest

from mqms.cli import main
from mqms.graph import alist_read


def test_threshold_fixed_delta(capsys):
    rc = main(["threshold", "--ensemble", "3,6", "--bits", "4",
               "--delta", "0.75", "--lmax", "100"])
    assert rc == 0
    out = json.loads(capsys.readouterr().out)
    assert 1.1 < out["threshold_db"] < 1.4


def test_de_trace_writes_schedule_and_csv(tmp_path, capsys):
    sched = tmp_path / "sched.json"
    csvf = tmp_path / "pe.csv"
    rc = main(["de-trace", "--ensemble", "3,6", "--bits", "4",
               "--delta", "0.75", "--ebn0", "2.0", "--lmax", "100",
               "--out-schedule", str(sched), "--out-csv", str(csvf)])
    assert rc == 0
    out = json.loads(capsys.readouterr().out)
    assert out["converged"]
    assert sched.exists() and csvf.read_text().startswith("iteration,pe")


def test_stability_json(capsys):
    rc = main(["stability", "--ensemble", "4,8", "--bits", "3",
               "--delta", "1.0", "--ebn0", "2.0"])
    assert rc == 0
    out = json.loads(capsys.readouterr().out)
    assert out["spectral_radius"] == 0.0 and out["stable"]


def test_peg_alist_round_trip(tmp_path, capsys):
    out = tmp_path / "g.alist"
    rc = main(["peg", "--ensemble", "3,6", "--n", "100", "--seed", "3",
               "--out", str(out)])
    assert rc == 0
    g = alist_read(out.read_text())
    assert g.n == 100 and g.m == 50


def test_simulate_csv(tmp_path, capsys):
    out = tmp_path / "fer.csv"
    rc = main(["simulate", "--ensemble", "3,6", "--n", "100",
               "--kind", "spa", "--snrs", "6.0", "--max-frames", "200",
               "--target-errors", "5", "--iters", "30", "--out", str(out)])
    assert rc == 0
    line = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert line["snr_db"] == 6.0
    assert out.read_text().startswith("snr_db,")


def test_unknown_ensemble_errors(capsys):
    rc = main(["threshold", "--ensemble", "nope", "--delta", "0.5"])
    assert rc == 1
    err = json.loads(capsys.readouterr().err)
    assert "error" in err
