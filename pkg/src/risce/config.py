"""System dimensions, algorithm knobs, and the identifiability gate."""

from dataclasses import dataclass, field

__all__ = ["SystemConfig", "ConfigError", "config_violations", "validate_config"]


@dataclass
class SystemConfig:
    """
    Dimensions and run parameters of one closed-loop setup.

    M, L     : BS / UT antenna counts
    N        : RIS element count
    T        : pilot length (time slots per block)
    K        : RIS block count
    P        : retransmission (coding) slot count
    """

    M: int
    L: int
    N: int
    T: int
    K: int
    P: int
    snr_db_grid: list = field(default_factory=lambda: [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0])
    mc_runs: int = 1000
    master_seed: int = 0
    tals_tol: float = 1e-6
    tals_max_iters: int = 1000


class ConfigError(ValueError):
    """Raised when a configuration violates one or more constraints."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


def config_violations(cfg):
    """
    Return every violated constraint by name (empty list when valid).

    The four inequalities guarantee uniqueness of the LS factor updates:
    T >= M and P >= L make the pilot / code matched filters invertible,
    L*K*M >= N and K*M^2 >= N^2 keep the alternating LS design matrices
    full row rank.
    """
    out = []
    dims = {"M": cfg.M, "L": cfg.L, "N": cfg.N, "T": cfg.T, "K": cfg.K, "P": cfg.P}
    for name, value in dims.items():
        if value < 1:
            out.append(f"{name} must be strictly positive")
    if out:
        return out
    if cfg.T < cfg.M:
        out.append("T >= M violated")
    if cfg.P < cfg.L:
        out.append("P >= L violated")
    if cfg.L * cfg.K * cfg.M < cfg.N:
        out.append("L*K*M >= N violated")
    if cfg.K * cfg.M**2 < cfg.N**2:
        out.append("K*M^2 >= N^2 violated")
    if cfg.mc_runs < 1:
        out.append("mc_runs >= 1 violated")
    return out


def validate_config(cfg):
    """Return ``cfg`` unchanged when valid, else raise :class:`ConfigError`."""
    violations = config_violations(cfg)
    if violations:
        raise ConfigError(violations)
    return cfg
