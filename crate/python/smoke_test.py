"""Smoke test for the jaguar Python extension.

Build and install first:  pip install --no-build-isolation ./crates/python
Then run:                 python python/smoke_test.py
"""

import json
import tempfile
from pathlib import Path

import jaguar

FOUR_CYCLE = "Q(X,Y,Z,W) :- R(X,Y), S(Y,Z), T(Z,W), U(W,X)."
BOOLEAN = "Q() :- R(X,Y), S(Y,Z), T(Z,W), U(W,X)."


def main() -> None:
    w = json.loads(jaguar.width(FOUR_CYCLE, classic=True))
    assert abs(w["subw"] - 1.5) < 1e-6, w
    print(f"subw(4-cycle) = {w['subw']:.4f} over {w['selectors_solved']} selectors")

    with tempfile.TemporaryDirectory() as tmp:
        sq = Path(tmp) / "sq6"
        jaguar.gen_square(6, str(sq))
        ev = jaguar.evaluate(FOUR_CYCLE, data=str(sq), epsilon=0.5)
        ref = jaguar.oracle(FOUR_CYCLE, data=str(sq))
        assert ev.columns == ["X", "Y", "Z", "W"]
        assert ev.rows == ref.rows and ev.tsv == ref.tsv
        assert len(ev) == 17, len(ev)
        trace = json.loads(ev.trace_json)
        assert trace["N"] == 20 and trace["nodes"][0]["edge"] == "root"
        print(f"4-cycle on the m=6 square: {len(ev)} answers, work {ev.work}, {len(trace['nodes'])} trace nodes")

        big = Path(tmp) / "sq256"
        jaguar.gen_square(256, str(big))
        yes = jaguar.evaluate(BOOLEAN, data=str(big))
        assert yes.columns == [] and yes.rows == [[]], yes

    tables = {
        "R": (["X", "Y"], [["a", "b"], ["b", "c"]]),
        "S": (["Y", "Z"], [["b", "x"], ["c", "y"], ["q", "z"]]),
    }
    path = jaguar.evaluate("Q(X,Z) :- R(X,Y), S(Y,Z).", tables=tables)
    assert path.rows == [["a", "x"], ["b", "y"]], path.rows

    try:
        jaguar.evaluate("Q(X) :- Missing(X).", tables=tables)
    except ValueError as e:
        assert "Missing" in str(e)
    else:
        raise AssertionError("missing relation accepted")

    tds = json.loads(jaguar.decompositions(FOUR_CYCLE))["tds"]
    print(f"{len(tds)} decompositions; all checks passed")


if __name__ == "__main__":
    main()
