"""Built-in invariant battery behind the ``selftest`` CLI subcommand."""

import numpy as np

from .config import SystemConfig
from .estimators import evaluate_proposed, tals_fit
from .protocol import complex_gaussian, dense_core, gen_channels, gen_protocol
from .simulation import simulate_observation
from .tensor_ops import (
    khatri_rao_cols,
    kronecker,
    mode_n_fold,
    mode_n_product,
    mode_n_unfold,
    multimode_unfold_12_34,
    unvec,
    vec,
)
from .experiment import ExperimentSpec, emit_csv, run_experiment

__all__ = ["run_selftest"]


def _rel_err(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300)


def _model_loops(channels, protocol):
    """Elementwise six-factor model sum; independent of the package kernels."""
    m = channels.H_d.shape[0]
    n = channels.H_d.shape[1]
    k = protocol.S_d.shape[0]
    l = channels.G_d.shape[0]
    z = np.zeros((m, m, k, l), dtype=np.complex128)
    for m1 in range(m):
        for m2 in range(m):
            for ki in range(k):
                for li in range(l):
                    acc = 0.0 + 0.0j
                    for nu in range(n):
                        for nd in range(n):
                            acc += (
                                channels.H_u[m1, nu]
                                * channels.H_d[m2, nd]
                                * protocol.S_u[ki, nu]
                                * protocol.S_d[ki, nd]
                                * channels.G_u[li, nu]
                                * channels.G_d[li, nd]
                            )
                    z[m1, m2, ki, li] = acc
    return z


def _check_identities(rng):
    worst = 0.0
    for _ in range(20):
        i, j, r, s = (int(v) for v in rng.integers(2, 7, size=4))
        a = complex_gaussian(rng, (i, r))
        c = complex_gaussian(rng, (r, s))
        b = complex_gaussian(rng, (j, r))
        d = complex_gaussian(rng, (r, s))
        lhs = khatri_rao_cols(a @ c, b @ d)
        rhs = kronecker(a, b) @ khatri_rao_cols(c, d)
        worst = max(worst, _rel_err(lhs, rhs))

        x = complex_gaussian(rng, (i, r))
        y = complex_gaussian(rng, (r, j))
        z = complex_gaussian(rng, (j, s))
        worst = max(worst, _rel_err(vec(x @ y @ z), kronecker(z.T, x) @ vec(y)))

        d_vec = complex_gaussian(rng, r)
        z2 = complex_gaussian(rng, (r, s))
        worst = max(
            worst,
            _rel_err(vec(x @ np.diag(d_vec) @ z2), khatri_rao_cols(z2.T, x) @ d_vec),
        )

        va = complex_gaussian(rng, i)
        vb = complex_gaussian(rng, i)
        if not np.array_equal(np.diag(va) @ vb, np.diag(vb) @ va):
            worst = max(worst, 1.0)
    return worst <= 1e-10, f"max relative error {worst:.2e}"


def _check_round_trips(rng):
    x = complex_gaussian(rng, (3, 4, 2, 5))
    ok = np.array_equal(unvec(vec(x[:, :, 0, 0]), (3, 4)), x[:, :, 0, 0])
    for mode in range(4):
        ok = ok and np.array_equal(mode_n_fold(mode_n_unfold(x, mode), mode, x.shape), x)
    return ok, "vec/unfold round trips bit-exact" if ok else "round trip mismatch"


def _check_core(_rng):
    for n in (2, 3):
        core = dense_core(n)
        eye = np.eye(n * n, dtype=np.complex128)
        target = khatri_rao_cols(eye, eye).T
        if not np.array_equal(multimode_unfold_12_34(core), target):
            return False, f"core multimode mismatch at N={n}"
    return True, "selection core matches its multimode identity"


def _check_model_equivalence(rng):
    cfg = SystemConfig(M=2, L=2, N=2, T=2, K=4, P=2)
    channels = gen_channels(cfg, rng)
    protocol = gen_protocol(cfg)
    obs = simulate_observation(channels, protocol, float("inf"), rng)

    core = dense_core(cfg.N)
    g = khatri_rao_cols(channels.G_d.T, channels.G_u.T)
    tucker = core
    for mode, factor in enumerate((channels.H_u, channels.H_d, protocol.S, g.T)):
        tucker = mode_n_product(tucker, factor, mode)
    err_tucker = _rel_err(obs.tensor, tucker)
    err_loops = _rel_err(obs.tensor, _model_loops(channels, protocol))
    ok = err_tucker <= 1e-10 and err_loops <= 1e-10
    return ok, f"dense-core err {err_tucker:.2e}, elementwise err {err_loops:.2e}"


def _check_exact_recovery(rng):
    cfg = SystemConfig(M=4, L=2, N=4, T=4, K=16, P=2, tals_max_iters=500)
    channels = gen_channels(cfg, rng)
    protocol = gen_protocol(cfg)
    obs = simulate_observation(channels, protocol, float("inf"), rng)
    state = tals_fit(obs.tensor, protocol.S, cfg, rng)
    result = evaluate_proposed(state, channels)
    worst = max(result.nmse[k] for k in ("H_d", "H_u", "G_d", "G_u"))
    ok = state.converged and worst <= 1e-6
    return ok, f"converged={state.converged} in {state.iterations} iters, worst NMSE {worst:.2e}"


def _check_determinism(_rng):
    import io

    cfg = SystemConfig(M=2, L=2, N=2, T=2, K=4, P=2, snr_db_grid=[10.0], mc_runs=2, master_seed=7)
    spec = ExperimentSpec(system=cfg, methods=("proposed", "fdd_ls"), feedback_modes=("awgn",))

    def render(table):
        buf = io.StringIO()
        for r in table.rows:
            buf.write(f"{r.method},{r.feedback},{r.label},{r.snr_db},{r.nmse_mean!r},{r.runs}\n")
        return buf.getvalue()

    first = render(run_experiment(spec))
    second = render(run_experiment(spec))
    return first == second, "repeat campaign identical" if first == second else "campaign drifted"


def run_selftest():
    """Run every invariant suite; returns [(name, ok, detail)]."""
    checks = [
        ("tensor identities", _check_identities),
        ("round trips", _check_round_trips),
        ("selection core", _check_core),
        ("model equivalence", _check_model_equivalence),
        ("exact recovery", _check_exact_recovery),
        ("determinism", _check_determinism),
    ]
    results = []
    for name, fn in checks:
        rng = np.random.default_rng(20240 + len(name))
        try:
            ok, detail = fn(rng)
        except Exception as exc:  # noqa: BLE001 - report, don't crash the battery
            ok, detail = False, f"exception: {exc!r}"
        results.append((name, ok, detail))
    return results
