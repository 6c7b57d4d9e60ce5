"""Acceptance gate: every release criterion at its stated tolerance.

Each test prints one ``ACCEPTANCE PASS/FAIL`` line (run with ``pytest -s``
to stream them).  One criterion is expected red and documented as such: the
detected squeezing level computed from the gain-fitted cavity parameters
cannot reach the reference value, because fitting both measured gains
through the reflection model attributes enough intracavity loss to cap the
attainable squeezing below what the de-amplification alone implies.  The
test asserts the stated chain anyway; see the README's "known model
inconsistencies" note and the run summary of the bundled spectrum recipe.
"""

import math
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))
from helpers import read_csv  # noqa: E402

from homolock import OPOParams, QuadPair, TwoModeField  # noqa: E402
from homolock import dynamics, ffsqueezer, lockloop, spectra, steadystate  # noqa: E402
from homolock.cli import load_config, main  # noqa: E402


def _report(name, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"ACCEPTANCE {status}: {name}{suffix}")
    assert ok, f"{name}{suffix}"


def test_criterion_01_qnl_normalization():
    rng = np.random.default_rng(101)
    omegas = np.linspace(-8.0, 8.0, 1000)
    worst = 0.0
    for _ in range(100):
        ks = rng.uniform(0.05, 1.0)
        kl = rng.uniform(0.0, 1.0)
        p = OPOParams.normalized(chi=0.0, kappa_s=ks, kappa_l=kl)
        for quad in ("+", "-"):
            v = spectra.variance(p, omegas * p.kappa, quad)
            worst = max(worst, float(np.max(np.abs(v - 1.0))))
    _report("qnl_normalization", worst < 1e-12, f"max |V-1| = {worst:.2e}")


def test_criterion_02_purity_product():
    rng = np.random.default_rng(102)
    omegas = np.linspace(-8.0, 8.0, 1000)
    worst = 0.0
    for _ in range(100):
        ks = rng.uniform(0.05, 1.0)
        chi = rng.uniform(0.0, 0.95) * ks
        p = OPOParams.normalized(chi=chi, kappa_s=ks, kappa_l=0.0)
        prod = (spectra.variance(p, omegas * p.kappa, "+")
                * spectra.variance(p, omegas * p.kappa, "-"))
        worst = max(worst, float(np.max(np.abs(prod - 1.0))))
    _report("purity_product", worst < 1e-12, f"max |V+V- - 1| = {worst:.2e}")


def test_criterion_03_steady_state_oracle():
    rng = np.random.default_rng(103)
    worst = 0.0
    for _ in range(1000):
        ks = rng.uniform(0.05, 1.0)
        kl = rng.uniform(0.0, 1.0)
        chi = rng.uniform(0.0, 0.9) * (ks + kl)
        delta = rng.uniform(-3.0, 3.0) * (ks + kl)
        p = OPOParams(kappa_s=ks, kappa_l=kl, chi=chi, tau=1e-9, detuning=delta)
        seed = QuadPair(rng.normal(), rng.normal())
        got = dynamics.integrate_mean(p, seed)
        want = steadystate.output_quadratures(p, seed)
        scale = max(abs(want.x_plus), abs(want.x_minus), 1e-12)
        worst = max(worst,
                    abs(got.x_plus - want.x_plus) / scale,
                    abs(got.x_minus - want.x_minus) / scale)
    _report("steady_state_oracle", worst < 1e-8,
            f"worst relative deviation {worst:.2e} over 1000 draws")


_SPECTRUM_SETS = [
    (0.0, 1.0), (0.8, 1.0), (0.5, 1.0), (0.3, 0.8), (0.6, 0.7),
    (0.2, 0.5), (0.7, 0.9), (0.4, 0.6), (0.85, 0.95), (0.1, 0.3),
]


def test_criterion_04_spectrum_oracle():
    seg = 4096
    n_segments = 10000
    n = seg + (n_segments - 1) * (seg // 2)
    worst = 0.0
    for idx, (chi, ks_frac) in enumerate(_SPECTRUM_SETS):
        p = OPOParams.normalized(chi=chi, kappa_s=ks_frac, kappa_l=1.0 - ks_frac)
        cfg = dynamics.SimConfig(dt=0.05, duration=0.05 * n,
                                 seed_value=400 + idx, params=p)
        series = dynamics.integrate_fluctuations(cfg)
        tr = dynamics.estimate_psd(series, segment_length=seg, overlap=0.5)
        band = np.abs(tr.frequencies) <= 3.0
        for got, quad in ((tr.variance_plus, "+"), (tr.variance_minus, "-")):
            want = spectra.variance(p, tr.frequencies[band], quad)
            dev = float(np.max(np.abs(got[band] / want - 1.0)))
            worst = max(worst, dev)
    _report("spectrum_oracle", worst < 0.05,
            f"worst pointwise deviation {worst:.3f} over "
            f"{len(_SPECTRUM_SETS)} parameter sets, {n_segments} segments")


def test_criterion_05_gain_fit():
    fit = steadystate.fit_gains(3.9, 2.6, "input-referenced")
    p = fit.params()
    amp = steadystate.classical_gain_db(p, "+", "input-referenced")
    deamp = steadystate.classical_gain_db(p, "-", "input-referenced")
    ok = abs(amp - 3.9) < 1e-6 and abs(deamp + 2.6) < 1e-6
    alternate_reported = False
    try:
        steadystate.fit_gains(3.9, 2.6, "unpumped-referenced")
    except steadystate.NoFeasibleSolution:
        alternate_reported = True
    _report("gain_fit", ok and alternate_reported,
            f"input-referenced round-trip ({amp:.7f}, {deamp:.7f}) dB; "
            f"unpumped-referenced reports NoFeasibleSolution = {alternate_reported}")


def test_criterion_06_efficiency_inference(tmp_path):
    eta = spectra.infer_efficiency(2.0, 2.6)
    ok_value = abs(eta - 0.82) < 0.01
    # the discrepancy with the reference quote must be surfaced in CLI output
    import contextlib
    import io
    buf = io.StringIO()
    with contextlib.redirect_stdout(buf):
        rc = main(["spectrum", "--out", str(tmp_path)])
    surfaced = ">87%" in buf.getvalue()
    _report("efficiency_inference", ok_value and rc == 0 and surfaced,
            f"eta = {eta:.4f}; caveat surfaced in CLI output = {surfaced}")


def test_criterion_07_sweep_signature():
    cfg = load_config("sweep")
    cav, sw = cfg.values["cavity"], cfg.values["sweep"]
    params = OPOParams(kappa_s=cav["kappa_s"], kappa_l=cav["kappa_l"],
                       chi=sw["chi"], tau=1.0 / cav["fsr"])
    field = TwoModeField.real_input(power_split=sw["power_split"],
                                    lo_resonance_offset=sw["lo_offset"])
    grid = np.linspace(sw["span_min"], sw["span_max"], sw["points"])
    trace = steadystate.sweep(params, field, grid)
    crossings = steadystate.dispersion_crossings(trace)
    peaks = steadystate.transmission_peaks(trace, min_height=0.1)
    ok = (len(crossings) == 2
          and crossings[0][1] * crossings[1][1] < 0.0
          and len(peaks) == 1
          and abs(peaks[0]) < 0.05 * params.kappa)
    _report("sweep_signature", ok,
            f"{len(crossings)} crossings, slopes "
            f"{[s for _, s in crossings]}, peaks at {peaks}")


def test_criterion_08_detected_level_from_gain_fitted_parameters():
    """Chain the gain fit, the inferred efficiency and the spectrum.

    Expected red: the only feasible fit of the (3.9, 2.6) dB gain pair
    assigns kappa_s/kappa = 0.235, whose loss-port vacuum admixture caps the
    attainable squeezing at -1.15 dB, so no efficiency below one can reach
    the -2.0 dB reference level.  The de-amplification-referenced recipe
    (bundled spectrum config) does reproduce it; see README.
    """
    fit = steadystate.fit_gains(3.9, 2.6, "input-referenced")
    eta = spectra.infer_efficiency(2.0, 2.6)
    kappa = 2.0 * math.pi * 6e6
    params = fit.params(kappa=kappa, tau=1.0 / 199e6)
    omegas = np.linspace(-3.0 * kappa, 3.0 * kappa, 1001)
    trace = spectra.spectrum_trace(params, omegas, eta)
    i_min = int(np.argmin(trace.variance_minus))
    min_db = spectra.to_db(trace.variance_minus[i_min])
    at_zero = trace.frequencies[i_min] == pytest.approx(0.0, abs=1e-9)
    ok = at_zero and abs(min_db - (-2.0)) <= 0.3
    _report("detected_level_from_gain_fitted_parameters", ok,
            f"minimum {min_db:+.3f} dB at omega = {trace.frequencies[i_min]:.1f} "
            f"(target -2.0 +/- 0.3 dB)")


def test_criterion_09_sub_qnl_discriminator():
    p_half = OPOParams.normalized(chi=0.5)
    cfg = lockloop.LockConfig(params=p_half, dt=0.5, duration=0.5 * 60000,
                              rng_seed=109, noise_mode="qnl")
    comp = lockloop.residual_noise_comparison(cfg, n_trials=50)
    ok_squeezed = abs(comp.ratio - 1.0 / 3.0) <= 0.1 / 3.0

    p_zero = OPOParams.normalized(chi=0.0)
    cfg0 = lockloop.LockConfig(params=p_zero, dt=0.5, duration=0.5 * 60000,
                               rng_seed=110, noise_mode="qnl")
    comp0 = lockloop.residual_noise_comparison(cfg0, n_trials=50)
    ok_unity = abs(comp0.ratio - 1.0) <= 0.03
    _report("sub_qnl_discriminator", ok_squeezed and ok_unity,
            f"chi=0.5k ratio {comp.ratio:.4f} +/- {comp.stderr:.4f} "
            f"(target 1/3 +/- 10%); chi=0 ratio {comp0.ratio:.4f} "
            f"(target 1 +/- 3%)")


def test_criterion_10_lock_acquisition_and_rejection():
    p = OPOParams.normalized(chi=0.5)
    acq_cfg = lockloop.LockConfig(params=p, dt=0.5, duration=20000.0,
                                  rng_seed=111, noise_mode="noiseless",
                                  disturbance=lockloop.DisturbanceSpec(
                                      initial_offset=0.5))
    acq = lockloop.simulate_lock(acq_cfg)
    ok_acq = acq.acquisition_time is not None and math.isfinite(acq.acquisition_time)

    f_d = 0.02 / (2.0 * math.pi) / 15.0
    sin_cfg = lockloop.LockConfig(params=p, dt=0.5, duration=0.5 * 300000,
                                  rng_seed=112, noise_mode="noiseless",
                                  disturbance=lockloop.DisturbanceSpec(
                                      sinusoid_amplitude=0.05,
                                      sinusoid_frequency=f_d))
    run = lockloop.simulate_lock(sin_cfg)
    half = len(run.t) // 2
    measured = (float(np.sqrt(np.mean(run.detuning[half:] ** 2)))
                / float(np.sqrt(np.mean(run.open_loop_detuning[half:] ** 2))))
    predicted = lockloop.loop_suppression(sin_cfg, f_d)
    ok_sup = measured <= 0.10 and abs(measured / predicted - 1.0) <= 0.20
    _report("lock_acquisition_and_rejection", ok_acq and ok_sup,
            f"acquired at t={acq.acquisition_time}; suppression measured "
            f"{measured:.4f} vs predicted {predicted:.4f}")


def test_criterion_11_universal_squeezer():
    worst_coeff = 0.0
    worst_gain = 0.0
    for t_bs in (0.1, 0.5, 0.9):
        gain = ffsqueezer.default_gain(t_bs)
        coeffs = ffsqueezer.output_coefficients(t_bs, gain, "-")
        worst_coeff = max(worst_coeff, abs(float(coeffs["-"][3])))
        inp = ffsqueezer.displaced(ffsqueezer.vacuum(1), 0, 0.0, 1.0)
        out = ffsqueezer.universal_squeezer(inp, 0.25, t_bs)
        worst_gain = max(worst_gain, abs(float(out.mean[1]) - 1.0 / math.sqrt(t_bs)))

    rng = np.random.default_rng(113)
    t_bs, v = 0.5, 0.25
    n = 10 ** 6
    joint = ffsqueezer.tensor(ffsqueezer.vacuum(1), ffsqueezer.squeezed_vacuum(v))
    samples = rng.standard_normal((n, 4)) * np.sqrt(np.diag(joint.cov))
    s = ffsqueezer.beamsplitter_symplectic(2, (0, 1), t_bs)
    mixed = samples @ s.T
    out_mc = np.stack([mixed[:, 0],
                       mixed[:, 1] + ffsqueezer.default_gain(t_bs) * mixed[:, 3]])
    emp = np.cov(out_mc)
    alg = ffsqueezer.universal_squeezer(ffsqueezer.vacuum(1), v, t_bs).cov
    scale = np.sqrt(np.outer(np.diag(alg), np.diag(alg)))
    mc_dev = float(np.max(np.abs(emp - alg) / scale))

    ok = worst_coeff < 1e-12 and worst_gain < 1e-12 and mc_dev < 0.02
    _report("universal_squeezer", ok,
            f"ancilla coefficient {worst_coeff:.2e}, mean-gain error "
            f"{worst_gain:.2e}, Monte Carlo deviation {mc_dev:.4f}")


def test_criterion_12_cli_reproducibility(tmp_path, capsys):
    specs = [
        (["spectrum", "--config", "paper_fig3.cfg"], ("spectrum.csv", "spectrum.svg")),
        (["sweep", "--config", "paper_fig2.cfg"], ("sweep.csv", "sweep.svg")),
        (["lock", "--set", "lock.duration=0.05 ms"], ("lock.csv", "lock.svg")),
        (["squeezer", "--set", "squeezer.trajectories=128"],
         ("squeezer.csv", "squeezer_trajectories.csv")),
    ]
    identical = True
    details = []
    for argv, files in specs:
        blobs = []
        for run in range(2):
            out_dir = tmp_path / f"{argv[0]}_{run}"
            rc = main(argv + ["--svg", "--out", str(out_dir), "--seed", "424242"])
            assert rc == 0
            stdout = capsys.readouterr().out
            payload = [stdout]
            for name in files:
                with open(out_dir / name, "rb") as fh:
                    payload.append(fh.read())
            blobs.append(payload)
        same = blobs[0] == blobs[1]
        identical = identical and same
        details.append(f"{argv[0]}={'ok' if same else 'DIFFERS'}")
    _report("cli_reproducibility", identical, ", ".join(details))
