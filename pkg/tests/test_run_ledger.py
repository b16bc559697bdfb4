from dbar_solver.db.run_ledger import (
    add_run_entry,
    digest,
    find_by_digest,
    get_duplicate_count,
    list_runs,
    remove_duplicates,
)


def test_add_is_idempotent(ledger_path):
    first = add_run_entry("verify", "cfg-a", "rep-a", True, {"checks": 3}, db_path=ledger_path)
    again = add_run_entry("verify", "cfg-a", "rep-a", True, {"checks": 3}, db_path=ledger_path)
    assert first == again
    assert len(list_runs(db_path=ledger_path)) == 1


def test_list_newest_first_and_filtered(ledger_path):
    add_run_entry("solve", "cfg-a", "rep-1", db_path=ledger_path)
    add_run_entry("verify", "cfg-a", "rep-2", False, db_path=ledger_path)
    add_run_entry("solve", "cfg-b", "rep-3", db_path=ledger_path)

    rows = list_runs(db_path=ledger_path)
    assert [r["report_digest"] for r in rows] == ["rep-3", "rep-2", "rep-1"]

    solves = list_runs("solve", db_path=ledger_path)
    assert {r["config_digest"] for r in solves} == {"cfg-a", "cfg-b"}
    assert list_runs(limit=1, db_path=ledger_path)[0]["report_digest"] == "rep-3"

    verify = list_runs("verify", db_path=ledger_path)[0]
    assert verify["passed"] == 0
    assert rows[-1]["passed"] is None


def test_summary_keeps_json_values_only(ledger_path):
    add_run_entry("solve", "cfg", "rep", summary={"k_star": 2, "bad": object()}, db_path=ledger_path)
    (row,) = find_by_digest("cfg", db_path=ledger_path)
    assert row["summary"] == {"k_star": 2}


def test_duplicates_keep_the_first_row(ledger_path):
    ids = [add_run_entry("verify", "cfg", f"rep-{i}", db_path=ledger_path) for i in range(3)]
    add_run_entry("solve", "cfg", "rep-0", db_path=ledger_path)

    assert get_duplicate_count(db_path=ledger_path) == 2
    assert remove_duplicates(db_path=ledger_path) == 2
    assert get_duplicate_count(db_path=ledger_path) == 0

    remaining = find_by_digest("cfg", db_path=ledger_path)
    assert [r["id"] for r in remaining if r["command"] == "verify"] == [ids[0]]
    assert len(remaining) == 2


def test_empty_ledger(ledger_path):
    assert list_runs(db_path=ledger_path) == []
    assert get_duplicate_count(db_path=ledger_path) == 0
    assert remove_duplicates(db_path=ledger_path) == 0


def test_digest():
    assert digest("abc") == digest("abc")
    assert digest("abc") != digest("abd")
    assert len(digest("")) == 64
