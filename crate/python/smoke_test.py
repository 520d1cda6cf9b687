"""Smoke test for the fractal_sumset_py extension module."""

import math

import fractal_sumset_py as fs


def main():
    assert fs.star(6) == 2 and fs.star(112) == 3
    assert fs.classify_angle(1, 2)[2] == "big"
    assert fs.classify_angle(1, 1)[2] == "small"

    ifs = fs.Ifs.four_corner("1/4")
    assert len(ifs) == 4
    assert abs(ifs.similarity_dimension() - 1.0) < 1e-12
    corners, side = ifs.cover(3)
    assert len(corners) == 4 ** 3 and abs(side - 4.0 ** -3) < 1e-15
    assert ifs.verify_ssc(3)
    assert fs.Ifs.from_text(ifs.to_text()).to_text() == ifs.to_text()

    length, _ = ifs.project("1/2", 6)
    assert length > 0.5

    res = fs.sumset_ladder("1/9", eps_start=0.125, eps_stop=1 / 128)
    target = 1 + math.log(4) / math.log(9)
    assert abs(res.slope - target) < 0.2, res.slope
    assert len(res.eps) == len(res.box_counts) >= 4

    rungs = fs.projection_ladder("1/4", "1/1", 5)
    assert [r[0] for r in rungs] == [1, 2, 3, 4, 5]

    r, phi = fs.psi((0.0, 0.0), 0.5, 0.3)
    assert abs(r - 0.5) < 1e-12
    assert fs.lipschitz_audit("plus", samples=5000) == 0

    e = fs.riesz_energy_uniform(0.5, 200_000)
    assert abs(e - 8 / 3) / (8 / 3) < 0.05, e

    ce = fs.Ifs.counterexample(["1/2"], "3/10", mode="a-prime", maps=4)
    assert len(ce) == 4 and ce.verify_ssc(3)
    print("smoke test ok")


if __name__ == "__main__":
    main()
