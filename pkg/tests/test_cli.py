import csv
import json
import pytest

from cransim.cli import main

SMALL = ["--profile", "desk", "--override", "K=2", "--override", "N_R=4",
         "--override", "trials=2", "--override", "packets=1",
         "--override", "symbols_per_packet=20", "--override", "snr_db_list=0",
         "--override", "bits_list=3", "--override", "receiver_list=FR_MMSE_SIC, LRA_MMSE_SIC"]


def rows(path):
    with (path / "results.csv").open() as f:
        return list(csv.DictReader(f))


def test_profile_run(tmp_path, capsys):
    assert main(SMALL + ["--out", str(tmp_path), "--mode", "both"]) == 0
    out = rows(tmp_path)
    assert [r["receiver"] for r in out] == ["FR_MMSE_SIC", "LRA_MMSE_SIC"]
    assert all(r["sumrate"] and r["ber"] for r in out)
    assert json.loads((tmp_path / "results.json").read_text())["mode"] == "both"
    assert "complete" in capsys.readouterr().out


def test_config_file_with_profile_defaults(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("K = 1\nN_R = 2\ntrials = 1\npackets = 1\nsymbols_per_packet = 10\n"
                   "snr_db_list = 5\nbits_list = 2\nreceiver_list = LRA_MMSE\n")
    assert main(["--config", str(cfg), "--profile", "desk", "--out", str(tmp_path / "o")]) == 0
    assert rows(tmp_path / "o")[0]["bits"] == "2"


def test_free_form_key_value_overrides(tmp_path):
    args = SMALL + ["--out", str(tmp_path), "--trials", "1", "--snr_db_list=7"]
    assert main(args) == 0
    out = rows(tmp_path)
    assert out[0]["trials"] == "1" and out[0]["snr_db"] == "7.0"


def test_stage_rates_flag(tmp_path):
    assert main(SMALL + ["--out", str(tmp_path), "--mode", "sumrate", "--stage-rates"]) == 0
    assert (tmp_path / "stage_rates.csv").exists()


def test_bad_worker_count(tmp_path):
    assert main(SMALL + ["--out", str(tmp_path), "--workers", "0"]) == 2


@pytest.mark.parametrize("extra", [
    ["--override", "K=0"],
    ["--override", "colour=blue"],
    ["--bogus"],
    ["--trials"],
])
def test_config_errors_exit_2(tmp_path, capsys, extra):
    assert main(SMALL + extra + ["--out", str(tmp_path)]) == 2
    assert "config error" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main(["--config", str(tmp_path / "none.cfg"), "--out", str(tmp_path)]) == 2


def test_needs_a_source(tmp_path):
    assert main(["--out", str(tmp_path)]) == 2


def test_unwritable_output_exits_1(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(SMALL + ["--out", str(blocker / "sub")]) == 1


def test_out_is_required():
    with pytest.raises(SystemExit) as exc:
        main(["--profile", "desk"])
    assert exc.value.code == 2
