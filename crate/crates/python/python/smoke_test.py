"""Smoke test for the matryoshka extension module."""

import json
import math

import matryoshka as m


def main():
    rho = 0.75
    assert abs(m.bound_f(1, rho) - rho) < 1e-12
    assert abs(m.bound_adaboost(4, rho) - rho**4) < 1e-15
    assert abs(m.bound_m2(8, rho) - 0.41940128803253174) < 1e-15
    eps = math.sqrt(1 - rho * rho) / 2
    assert abs(m.rho_from_epsilon(eps) - rho) < 1e-15

    xs = [[i / 20, ((7 * i) % 20) / 20] for i in range(20)]
    ys = [1 if a + 0.5 * b > 0.7 else -1 for a, b in xs]
    data = m.Dataset(xs, ys)
    assert len(data) == 20 and data.dim == 2

    tree = m.train_ptree(data, 6, seed=4)
    assert tree.kind == "ptree" and tree.weak_learner_calls == 6
    mean, se = tree.misclassification(data, trials=200, seed=1)
    assert 0.0 <= mean <= 1.0 and se >= 0.0

    nested = m.train_matryoshka(data, 3, oracle="constant-edge", epsilon=eps, exact_q=True)
    assert nested.weak_learner_calls == 8
    assert nested.bound <= m.bound_m2(8, rho) + 1e-9

    boosted = m.train(data, 4, seed=2)
    back = m.Model.from_json(boosted.to_json())
    assert back.bound == boosted.bound
    assert json.loads(back.to_json())["kind"] == "adaboost"

    rows = m.figure("nesting-levels")
    assert len(rows) == 26 and set(rows[0]) == {"T", "L", "iso", "integer"}

    try:
        m.Dataset([[0.0]], [0])
    except ValueError:
        pass
    else:
        raise AssertionError("label 0 accepted")

    print("smoke test ok")


if __name__ == "__main__":
    main()
