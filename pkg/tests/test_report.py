import numpy as np
import pytest

from mlcafem.report import CSV_HEADER, ReportError, compare, fit_slope, rate, read_levels


def _write(path, dofs, err, eta=None, t_eig=0.5):
    eta = err if eta is None else eta
    lines = [",".join(CSV_HEADER)]
    for k, (n, e, h) in enumerate(zip(dofs, err, eta)):
        e, h = float(e), float(h)
        lines.append(f"{k},{int(n)},{2 * int(n)},0,{1 + e!r},{e!r},{h!r},0.0,0.1,{t_eig},0.01,0.0,0.0")
    path.write_text("\n".join(lines) + "\n")
    return path


def test_exact_power_law(tmp_path):
    dofs = np.array([100, 180, 350, 700, 1300, 2600, 5000, 9000, 17000, 33000])
    fits = rate(_write(tmp_path / "a.csv", dofs, 3.0 / dofs, 2.0 / np.sqrt(dofs)))
    err = next(f for f in fits if f.quantity == "err_vs_ref")
    eta = next(f for f in fits if f.quantity == "eta_total")
    assert err.slope == pytest.approx(-1.0, abs=1e-9)
    assert eta.slope == pytest.approx(-0.5, abs=1e-9)
    assert err.n_points == 8
    assert err.r2 == pytest.approx(1.0)


def test_constant_error_slope_zero(tmp_path):
    dofs = [10, 20, 40, 80, 160]
    fits = rate(_write(tmp_path / "c.csv", dofs, [0.1] * 5))
    assert fits[0].slope == pytest.approx(0.0, abs=1e-12)


def test_insufficient_rows(tmp_path):
    with pytest.raises(ReportError):
        rate(_write(tmp_path / "s.csv", [10, 20, 40], [1, 0.5, 0.25]))


def test_window(tmp_path):
    dofs = np.geomspace(10, 1e5, 12)
    err = np.where(dofs < 1000, 1.0 / np.sqrt(dofs), 1.0 / dofs)
    fits = rate(_write(tmp_path / "w.csv", dofs.astype(int), err), window=4)
    assert fits[0].slope == pytest.approx(-1.0, abs=1e-2)


def test_compare_identical(tmp_path):
    p = _write(tmp_path / "x.csv", [10, 40, 160, 640], [1.0, 0.3, 0.08, 0.02])
    for m in compare(p, p):
        assert m.err_ratio == 1.0 and m.t_eig_ratio == 1.0 and m.t_total_ratio == 1.0
        assert m.dofs_a == m.dofs_b


def test_compare_buckets(tmp_path):
    a = _write(tmp_path / "a.csv", [100, 400, 1600], [1.0, 0.25, 0.06], t_eig=0.1)
    b = _write(tmp_path / "b.csv", [150, 700, 5000], [0.8, 0.2, 0.01], t_eig=1.0)
    matches = compare(a, b)
    assert [(m.dofs_a, m.dofs_b) for m in matches] == [(100, 150), (400, 700)]
    assert matches[0].err_ratio == pytest.approx(1.25)
    assert matches[0].t_eig_ratio == pytest.approx(0.1)


def test_compare_no_overlap(tmp_path):
    a = _write(tmp_path / "a.csv", [10, 20], [1.0, 0.5])
    b = _write(tmp_path / "b.csv", [1000, 2000], [1.0, 0.5])
    with pytest.raises(ReportError):
        compare(a, b)


def test_missing_columns(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("level,dofs\n0,1\n")
    with pytest.raises(ReportError):
        read_levels(p)


def test_malformed_number(tmp_path):
    p = _write(tmp_path / "m.csv", [10, 20, 40, 80], [1, 0.5, 0.25, 0.125])
    p.write_text(p.read_text().replace("0.125", "oops"))
    with pytest.raises(ReportError):
        read_levels(p)


def test_fit_slope_r2():
    s, r2 = fit_slope([1, 10, 100, 1000], [1, 0.1, 0.01, 0.001])
    assert s == pytest.approx(-1.0) and r2 == pytest.approx(1.0)
