"""Smoke test for the compiled extension. Run after building (see README)."""

import math

import advice_learn as al


def main():
    p = [0.3, 0.5, 0.7, 0.4]
    rows = al.sample(p, 2000, seed=1)
    assert len(rows) == 2000 and all(len(r) == 4 for r in rows)
    assert rows == al.sample(p, 2000, seed=1)

    assert al.tv_exact(p, p) == 0.0
    assert math.isinf(al.kl_product([0.5], [0.0]))
    lo, hi = al.tv_bounds(p, [0.35, 0.5, 0.6, 0.4], 0.25)
    assert lo <= al.tv_exact(p, [0.35, 0.5, 0.6, 0.4]) <= hi

    x = al.project_l1_ball([2.0, 0.0], [0.0, 0.0], 1.0, box_clamp=False)
    assert abs(x[0] - 1.0) < 1e-12 and abs(x[1]) < 1e-12
    est = al.constrained_least_squares(rows, [0.5] * 4, 0.3)
    assert sum(abs(a - 0.5) for a in est) <= 0.3 + 1e-9

    v = al.tolerant_test(p, p, 0.25, 0.1, seed=3)
    assert v.repetitions >= 1 and v.samples_used > 0

    q = [0.5] * 64
    e = al.approx_l1(q, q, 16, 0.05, 1.0, 0.2, seed=4)
    assert not e.failed and e.lambda_ > 0

    r = al.learn([0.5] * 16, q[:16], 0.3, 1 / 3, 0.1, 0.25, seed=5)
    assert r.branch in ("advice-lasso", "baseline")
    assert r.total_samples == r.samples_stage1 + r.samples_stage2

    try:
        al.learn([0.5] * 16, q[:16], 0.3, 1 / 3, 0.1, 0.7)
    except al.AdviceLearnError as err:
        assert "tau" in str(err)
    else:
        raise AssertionError("tau = 0.7 accepted")

    code = al.gv_code(40, 10, 4, 5, seed=6)
    pp, qq = al.unbalanced_instance(40, 0.5, code[0])
    assert abs(sum(abs(a - b) for a, b in zip(pp, qq)) - 10 * 0.5 / 40) < 1e-12
    print("smoke test passed")


if __name__ == "__main__":
    main()
