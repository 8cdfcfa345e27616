import hashlib
import os

import matplotlib.pyplot as plt
import numpy as np
import pytest

from ipm1d_plots.cli import main
from ipm1d_plots.render import HALF_PI, FigureSpec, SchemaError, render


def write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join("%.17g" % v for v in row) + "\n")


@pytest.fixture
def fixtures(tmp_path):
    theta = np.linspace(0, 1.1, 40)
    write_csv(
        tmp_path / "profile.csv",
        ["theta", "M", "G", "Gp"],
        zip(theta, 4 - 2 * theta**2, 0.5 * np.sin(2 * theta), np.cos(2 * theta)),
    )
    As = np.array([4.0, 2.0, 1.0, 0.5, 0.1, 0.01])
    write_csv(tmp_path / "sweep.csv", ["A", "L"], zip(As, HALF_PI - 0.3 * As ** 0.5))
    t = np.linspace(0.01, 0.9, 30)
    write_csv(
        tmp_path / "series.csv",
        ["t", "sup_P", "sup_P_times_1mt", "accum_grad"],
        zip(t, 4.0 / (1 - t), np.full_like(t, 4.0), -4 * np.log(1 - t)),
    )
    s = np.linspace(0, 5, 25)
    write_csv(
        tmp_path / "decay.csv",
        ["s", "sup_perturbation", "weighted_norm"],
        zip(s, 0.5 * np.exp(-s), 10 * np.exp(-0.5 * s)),
    )
    re = np.linspace(-3, 2, 20)
    write_csv(
        tmp_path / "spectrum.csv",
        ["re", "im", "resolved"],
        zip(re, np.sin(re), (re > 0).astype(float)),
    )
    return tmp_path


KINDS = {
    "profile": "profile.csv",
    "sweep": "sweep.csv",
    "blowup": "series.csv",
    "decay": "decay.csv",
    "spectrum": "spectrum.csv",
}


@pytest.mark.parametrize("kind", sorted(KINDS))
def test_each_kind_renders_exit_zero(fixtures, kind):
    out = fixtures / f"{kind}.png"
    code = main(["--kind", kind, "--in", str(fixtures / KINDS[kind]), "--out", str(out)])
    assert code == 0
    assert out.exists() and out.stat().st_size > 0


def test_missing_column_exits_nonzero_naming_it(fixtures, tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    write_csv(bad, ["A", "angle"], [(1.0, 1.2)])
    code = main(["--kind", "sweep", "--in", str(bad), "--out", str(tmp_path / "x.png")])
    assert code == 1
    err = capsys.readouterr().err
    assert "'L'" in err


def test_missing_column_every_kind(fixtures, tmp_path, capsys):
    from ipm1d_plots.render import SCHEMAS

    for kind, name in KINDS.items():
        src = np.genfromtxt(fixtures / name, delimiter=",", names=True)
        dropped = SCHEMAS[kind][-1]  # drop a required column
        keep = [c for c in src.dtype.names if c != dropped]
        out = tmp_path / f"broken_{kind}.csv"
        write_csv(out, keep, zip(*[src[c] for c in keep]))
        code = main(["--kind", kind, "--in", str(out), "--out", str(tmp_path / "y.png")])
        assert code == 1
        assert repr(dropped) in capsys.readouterr().err


def test_sweep_contains_half_pi_reference(fixtures):
    spec = FigureSpec(kind="sweep", inputs=[str(fixtures / "sweep.csv")], output=str(fixtures / "s.png"))
    fig = render(spec)
    try:
        ax = fig.axes[0]
        ys = [line.get_ydata() for line in ax.get_lines()]
        assert any(np.allclose(y, HALF_PI) for y in ys if len(np.atleast_1d(y)))
    finally:
        plt.close(fig)


def test_blowup_contains_value_four_reference(fixtures):
    spec = FigureSpec(
        kind="blowup", inputs=[str(fixtures / "series.csv")], output=str(fixtures / "b.png")
    )
    fig = render(spec)
    try:
        ax = fig.axes[0]
        ys = [np.atleast_1d(line.get_ydata()) for line in ax.get_lines()]
        assert any(np.allclose(y, 4.0) for y in ys)
    finally:
        plt.close(fig)


def test_render_deterministic_bytes(fixtures):
    out1 = fixtures / "d1.png"
    out2 = fixtures / "d2.png"
    for out in (out1, out2):
        code = main(["--kind", "decay", "--in", str(fixtures / "decay.csv"), "--out", str(out)])
        assert code == 0
    h1 = hashlib.sha256(out1.read_bytes()).hexdigest()
    h2 = hashlib.sha256(out2.read_bytes()).hexdigest()
    assert h1 == h2


def test_usage_errors_exit_two(tmp_path):
    assert main(["--kind", "nonsense", "--in", "x.csv", "--out", "y.png"]) == 2
    assert main(["--kind", "sweep"]) == 2


def test_bad_spec_rejected(tmp_path):
    with pytest.raises(ValueError):
        FigureSpec(kind="sweep", inputs=[], output="x.png")
    with pytest.raises(ValueError):
        FigureSpec(kind="wat", inputs=["a.csv"], output="x.png")
