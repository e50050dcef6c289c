"""Smoke test for the fair_auction_py extension.

Build and install first, e.g.

    maturin build --release -m crates/python/Cargo.toml
    pip install target/wheels/fair_auction-*.whl
"""

import json
import math

import fair_auction_py as fa


def close(a, b, tol=1e-9):
    return math.isclose(a, b, rel_tol=tol, abs_tol=tol)


def main():
    bids = fa.BidProfile([[8.0, 3.0], [9.0, 5.0]], support=(0.0, 10.0))
    assert bids.n == 4 and bids.m == 2

    sp = fa.second_price(bids)
    assert sp.winner == 2 and close(sp.price, 8.0), sp

    probs = fa.simple_group_probs(bids)
    assert close(probs[0], 9.0 / 17.0) and close(probs[1], 8.0 / 17.0), probs
    exp = fa.simple_expected(bids)
    assert close(sum(exp.win_prob), 1.0)

    assert fa.gpm_run(bids, 0.5, seed=7).to_json() == fa.gpm_run(bids, 0.5, seed=7).to_json()
    est = fa.gpm_expected(bids, 1.0, trials=400, seed=1)
    assert 0.0 <= sum(est.win_prob) <= 1.0 + 1e-12

    scores = fa.GroupScoreFunction([(1.0, 1.0, 0.0, 0.0)] * 2, base="linear", support=(0.0, 10.0))
    again = fa.GroupScoreFunction.from_json(scores.to_json())
    assert again.params == scores.params
    g = fa.gsm_expected(bids, scores)
    assert close(sum(g.win_prob), 1.0)
    assert all(0.0 <= p <= b + 1e-9 for p, b in zip(g.exp_payment, bids.bids))

    m = fa.metrics(g, bids)
    assert close(m["social_welfare"], g.social_welfare(bids.bids))
    assert m["group_gap"] >= 0.0

    one = fa.BidProfile([[4.0, 7.0, 1.0]], support=(0.0, 10.0))
    trained, curve = fa.train_scores(one, 0.5, episodes=3, steps=2, learning_rate=0.05)
    assert trained.m == 1 and curve[0][4]

    try:
        fa.gpm_run(bids, -1.0)
    except fa.AuctionException:
        pass
    else:
        raise AssertionError("negative epsilon accepted")

    grid = {
        "group_sizes": [[3, 5]],
        "valuations": [["uniform:0:10", "uniform:0:8"]],
        "epsilons": [0.5],
        "mechanisms": ["second_price", "simple"],
        "trials": 4,
    }
    csv = fa.run_grid(json.dumps(grid))
    assert len(csv.strip().splitlines()) == 3, csv

    print("smoke test passed")


if __name__ == "__main__":
    main()
