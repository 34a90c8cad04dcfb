from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from ecomlab.market import ConfigError
from ecomlab.workbench.cli import main
from ecomlab.workbench.config import Config, config_from_dict, load_config
from ecomlab.workbench.query import QueryError, parse_query, query
from ecomlab.workbench.run import STAGES, run_pipeline, run_stages
from ecomlab.workbench.store import StoreLayout, read_jsonl, write_jsonl

SMALL = {"auctions": 6, "bidder_range": [5, 15], "albums": 2, "retail_categories": 1, "retailers": 30}


def cfg(tmp_path: Path, **sim) -> Config:
    return config_from_dict({"seed": 1, "out": str(tmp_path), "simulation": {**SMALL, **sim}})


@pytest.fixture(scope="module")
def finished(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    c = config_from_dict({"seed": 0, "out": str(out), "simulation": {"auctions": 20}})
    return c, run_pipeline(c)


# ------------------------------------------------------------------- config


def test_defaults_and_yaml(tmp_path):
    assert Config().validate().simulation.auctions == 20
    path = tmp_path / "c.yaml"
    path.write_text("seed: 4\nsimulation:\n  auctions: 3\n  lot_range: [2, 2]\nharvest:\n  mode: interval\n")
    c = load_config(path, seed=9, out=str(tmp_path / "o"))
    assert (c.seed, c.simulation.auctions, c.simulation.lot_range, c.harvest.mode) == (9, 3, (2, 2), "interval")


@pytest.mark.parametrize(
    "data",
    [
        {"bogus": 1},
        {"simulation": {"auctoins": 3}},
        {"simulation": {"mix": {"EarlyMultiple": 0.5, "EarlySingle": 0.2, "LateArriver": 0.2}}},
        {"simulation": {"lot_range": [3, 1]}},
        {"harvest": {"mode": "sometimes"}},
        {"harvest": {"inject": {"explode": 1}}},
        {"analysis": {"k_range": [1, 4]}},
        {"simulation": 5},
    ],
)
def test_bad_configs(data):
    with pytest.raises(ConfigError):
        config_from_dict(data)


def test_digest_ignores_out():
    a = config_from_dict({"out": "x"})
    assert a.digest() == config_from_dict({"out": "y"}).digest() != config_from_dict({"seed": 1}).digest()


def test_unreadable_config(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")
    (tmp_path / "list.yaml").write_text("- 1\n")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "list.yaml")


# -------------------------------------------------------------------- store


def test_jsonl_times_are_iso_on_disk(tmp_path):
    path = tmp_path / "r.jsonl"
    write_jsonl(path, [{"capture_time": 946684800, "price": 5, "observed_after": None}])
    assert '"capture_time": "2000-01-01T00:00:00Z"' in path.read_text()
    assert list(read_jsonl(path)) == [{"capture_time": 946684800, "price": 5, "observed_after": None}]
    assert list(read_jsonl(tmp_path / "none.jsonl")) == []


# -------------------------------------------------------------------- runs


def test_end_to_end_manifest(finished):
    _, m = finished
    assert [s.stage for s in m.stages] == list(STAGES)
    assert all(s.records_out > 0 for s in m.stages)
    # what one stage emits is what the next consumes
    for a, b in zip(m.stages, m.stages[1:]):
        assert a.records_out == b.records_in


def test_manifest_written(finished):
    c, m = finished
    path = StoreLayout(Path(c.out)).manifests_dir / f"{m.run_id}.json"
    assert json.loads(path.read_text())["config_digest"] == c.digest()


def test_zero_targets_is_a_no_op(tmp_path):
    m = run_pipeline(cfg(tmp_path, auctions=0, albums=0, retail_categories=0))
    assert len(m.stages) == 6
    assert all((s.records_in, s.records_out, s.flags) == (0, 0, 0) for s in m.stages)


def test_same_config_same_results(tmp_path):
    a = run_pipeline(cfg(tmp_path / "a"))
    b = run_pipeline(cfg(tmp_path / "b"))
    assert a.comparable() == b.comparable()
    assert a.run_id != b.run_id
    for name in ("profiles", "collated", "analyzable_quotes"):
        ra = (tmp_path / "a" / "records" / f"{name}.jsonl").read_bytes()
        assert ra == (tmp_path / "b" / "records" / f"{name}.jsonl").read_bytes()


def test_stages_can_run_separately(tmp_path):
    c = cfg(tmp_path)
    run_stages(c, ("harvest",))
    run_stages(c, ("extract",))
    run_stages(c, ("cleanse", "collate"))
    m = run_stages(c, ("analyze", "report"))
    assert [s.stage for s in m.stages] == ["analyze", "report"]
    assert (tmp_path / "reports" / "taxonomy.csv").exists()


def test_stage_without_input_fails(tmp_path):
    with pytest.raises(ConfigError):
        run_stages(cfg(tmp_path), ("extract",))


def test_interval_mode_and_failures(tmp_path):
    c = config_from_dict(
        {
            "seed": 2,
            "out": str(tmp_path),
            "simulation": {"auctions": 4, "bidder_range": [5, 10]},
            "harvest": {"mode": "interval", "interval": 7200, "retries": 0, "backoff": 0, "inject": {"drop": 2, "garble": 1}},
        }
    )
    m = run_pipeline(c)
    harvest, extract = m.stages[0], m.stages[1]
    assert harvest.detail["gaps"] == 2
    assert extract.detail["malformed"] == 1 and extract.flags >= 1


# ------------------------------------------------------------------- query


def test_predicate_examples(finished):
    c, _ = finished
    layout = StoreLayout(Path(c.out))
    multi = list(query(layout, "profiles", "bid_count > 3"))
    assert multi and all(r["bid_count"] > 3 for r in multi)
    everything = list(query(layout, "profiles", ""))
    assert len(everything) == sum(1 for _ in read_jsonl(layout.records("profiles")))


def test_valid_bidder_count_matches_recount(finished):
    c, _ = finished
    layout = StoreLayout(Path(c.out))
    last: dict[str, dict] = {}
    for s in read_jsonl(layout.records("snapshots")):
        if s["auction_id"] not in last or s["capture_time"] > last[s["auction_id"]]["capture_time"]:
            last[s["auction_id"]] = s
    valid_auctions = {r["auction_id"] for r in read_jsonl(layout.records("verdicts")) if r["status"] == "Valid"}
    recount = 0
    for p in read_jsonl(layout.records("profiles")):
        if p["auction_id"] not in valid_auctions:
            continue
        winners = last[p["auction_id"]]["winners"]
        lowest = min(w[1] for w in winners)
        if p["bidder_id"] in {w[0] for w in winners} or 5 * p["final_bid"] >= 4 * lowest:
            recount += 1
    assert sum(1 for _ in query(layout, "valid_profiles")) == recount


def test_query_language():
    (a, b) = parse_query('category = "Books" and posted_price >= 1500')
    assert (a.field, a.op, a.value) == ("category", "=", "Books")
    assert (b.field, b.op, b.value) == ("posted_price", ">=", 1500)
    assert parse_query("title ~ 'Laser printer'")[0].value == "Laser printer"
    assert parse_query("product.category = 12")[0].value == 12
    for bad in ("price >", "price >> 3", "a = 1 b = 2", "= 3", '"x" = 1'):
        with pytest.raises(QueryError):
            parse_query(bad)


def test_query_unknown_field_and_set(finished):
    c, _ = finished
    layout = StoreLayout(Path(c.out))
    with pytest.raises(QueryError):
        list(query(layout, "profiles", "colour = red"))
    with pytest.raises(QueryError):
        query(layout, "nothing", "")


# --------------------------------------------------------------------- cli


def test_cli_run_query_review(tmp_path, capsys):
    out = str(tmp_path)
    code = main(["run", "--out", out, "--seed", "0"])
    assert code in (0, 2)
    capsys.readouterr()
    assert main(["query", "profiles", "bid_count", ">", "3", "--count", "--out", out]) == 0
    assert int(capsys.readouterr().out.strip()) >= 0
    assert main(["query", "profiles", "colour", "=", "red", "--out", out]) == 1
    assert main(["review", "list", "--out", out]) == 0
    listed = [json.loads(line) for line in capsys.readouterr().out.splitlines()]
    assert (code == 2) == bool(listed)
    if listed:
        item = listed[0]["item_id"]
        assert main(["review", "resolve", item, "looked fine", "--out", out]) == 0
        assert json.loads(capsys.readouterr().out)["resolved"] is True
        assert main(["review", "resolve", item, "again", "--out", out]) == 1


def test_cli_exit_codes(tmp_path, capsys):
    assert main([]) == 1
    assert main(["frobnicate"]) == 1
    assert main(["run", "--seed", "x"]) == 1
    assert main(["review", "list", "--out", str(tmp_path / "empty")]) == 0
    assert capsys.readouterr().out == ""
    assert main(["review", "resolve", "nope", "note", "--out", str(tmp_path / "empty")]) == 1
    bad = tmp_path / "bad.yaml"
    bad.write_text("simulation: {auctions: -1}\n")
    assert main(["run", "--config", str(bad), "--out", str(tmp_path)]) == 1


def test_cli_clean_run_exits_zero(tmp_path):
    conf = tmp_path / "c.yaml"
    conf.write_text("simulation:\n  auctions: 0\n  albums: 1\n")
    assert main(["run", "--config", str(conf), "--out", str(tmp_path / "o")]) == 0


def test_cli_simulate_and_serve(tmp_path, capsys):
    conf = tmp_path / "c.yaml"
    conf.write_text("simulation:\n  auctions: 2\n")
    assert main(["simulate", "--config", str(conf), "--out", str(tmp_path)]) == 0
    assert list((tmp_path / "simulation" / "auction").iterdir())
    assert main(["serve", "--config", str(conf), "--port", "0", "--duration", "0.2"]) == 0
    assert "serving" in capsys.readouterr().out


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "ecomlab", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "query" in proc.stdout


# -------------------------------------------------------------- properties

rows = st.lists(
    st.fixed_dictionaries({"bid_count": st.integers(0, 9), "bidder_id": st.sampled_from(["a", "b", "c"]),
                           "entry_time": st.integers(0, 2**31 - 1)}),
    max_size=30,
)


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(rows, st.integers(0, 9), st.sampled_from(["a", "b", "c"]))
def test_query_agrees_with_direct_filter(tmp_path, data, n, who):
    layout = StoreLayout(tmp_path)
    write_jsonl(layout.records("profiles"), data)
    got = list(query(layout, "profiles", f"bid_count >= {n} and bidder_id = {who}"))
    want = [r for r in data if r["bid_count"] >= n and r["bidder_id"] == who]
    # query output keeps the stored ISO form of time fields
    assert [(r["bid_count"], r["bidder_id"]) for r in got] == [(r["bid_count"], r["bidder_id"]) for r in want]
    assert all(isinstance(r["entry_time"], str) for r in got)
    assert list(read_jsonl(layout.records("profiles"))) == data
