"""Physical repeated-interaction models: probes, propagators, channels,
measurement unravelings, flux observables, and thermodynamic diagnostics.

A model is a system Hamiltonian, a driving Markov chain over probe labels,
one thermal probe specification per label, and initial system states.  All
derived objects (probe states, propagators U_w, reduced channels L_w,
two-time-measurement unravelings, flux observables) are built eagerly and
cached on the model, which is immutable afterwards.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import extended
from .chains import MarkovChain
from .quantum import (QuantumChannel, QuantumError, channel_from_kraus,
                      check_density_matrix, check_hermitian, choi_verify,
                      entropy_vn, interaction_kraus_atoms, partial_trace_env,
                      propagator, relative_entropy, superop_from_kraus,
                      tensor, thermal_state)
from .tolerances import DEFAULT, Tolerances


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class ProbeSpec:
    """One reservoir species: probe Hamiltonian, inverse temperature,
    interaction duration, and the coupling on system (x) probe."""
    h_env: np.ndarray
    beta: float
    tau: float
    coupling: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "h_env", np.asarray(self.h_env, dtype=complex))
        object.__setattr__(self, "coupling", np.asarray(self.coupling, dtype=complex))
        if self.beta < 0:
            raise ModelError(f"negative inverse temperature {self.beta}")
        if self.tau <= 0:
            raise ModelError(f"interaction duration must be positive, got {self.tau}")


@dataclass(frozen=True)
class TimeReversalData:
    """Anti-unitaries represented as (unitary W, then entrywise conjugation)."""
    w_sys: np.ndarray
    w_env: dict

    def __post_init__(self):
        object.__setattr__(self, "w_sys", np.asarray(self.w_sys, dtype=complex))
        object.__setattr__(self, "w_env",
                           {k: np.asarray(v, dtype=complex) for k, v in self.w_env.items()})


# ---------------------------------------------------------------------------
# measurement unraveling of one channel
# ---------------------------------------------------------------------------

@dataclass
class Outcome:
    """One two-time measurement outcome xi = (s, s'): entropy eigenvalue read
    before and after the interaction, with the CP map it selects."""
    index: int
    s_initial: float
    s_final: float
    delta: float
    kraus: np.ndarray            # (n_atoms, d, d)
    superop: np.ndarray = field(repr=False)
    prob_op: np.ndarray = field(repr=False)   # sum K^dagger K; p(xi) = tr(rho G)


@dataclass
class UnravelingEntry:
    label: object
    s_env: np.ndarray                    # entropy observable -log rho_env
    varsigma: np.ndarray                 # clustered entropy eigenvalues, ascending
    projections: list                    # probe-space projections per cluster
    outcomes: list                       # lexicographic in (s, s') cluster order
    kms_residual: float                  # ||S_E - beta (H_E - F)||, None at beta=0
    deltas: np.ndarray = None            # per-outcome increments
    _superops: np.ndarray = field(default=None, repr=False)
    _prob_ops: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.deltas is None:
            self.deltas = np.array([o.delta for o in self.outcomes])
        if self._superops is None:
            self._superops = np.stack([o.superop for o in self.outcomes])
        if self._prob_ops is None:
            self._prob_ops = np.stack([o.prob_op for o in self.outcomes])

    @property
    def n_outcomes(self):
        return len(self.outcomes)

    @property
    def prob_ops(self):
        return self._prob_ops

    def outcome_probabilities(self, rho) -> np.ndarray:
        return np.einsum("xij,ji->x", self._prob_ops, np.asarray(rho, dtype=complex)).real

    def deformed_superop(self, a: float) -> np.ndarray:
        """sum_xi exp(-a * delta_xi) S_xi, reusing the frozen Kraus atoms."""
        return np.einsum("x,xij->ij", np.exp(-a * self.deltas), self._superops)

    def completeness_residual(self, channel: QuantumChannel) -> float:
        return float(np.abs(self._superops.sum(axis=0) - channel.superop).max())


def _build_unraveling(label, u, rho_env, h_env, beta, free_energy, d_sys,
                      tol: Tolerances) -> UnravelingEntry:
    p_env, phi = np.linalg.eigh(rho_env)
    if p_env.min() <= tol.prob_floor:
        raise ModelError(
            f"probe state for {label!r} is singular; the entropy observable "
            "-log rho is undefined")
    varsigma_raw = -np.log(p_env)
    s_env = (phi * varsigma_raw) @ phi.conj().T

    kms_residual = None
    if beta > 0 and free_energy is not None:
        ref = beta * (h_env - free_energy * np.eye(h_env.shape[0]))
        kms_residual = float(np.abs(s_env - ref).max())
        if kms_residual > 1e-10:
            raise ModelError(
                f"entropy observable for {label!r} disagrees with beta(H - F) "
                f"(residual {kms_residual:.3e}); probe state is not thermal for h_env")

    # cluster the entropy spectrum (ascending) to width degeneracy_tol
    order = np.argsort(varsigma_raw)
    clusters = [[order[0]]]
    for idx in order[1:]:
        if varsigma_raw[idx] - varsigma_raw[clusters[-1][-1]] <= tol.degeneracy:
            clusters[-1].append(idx)
        else:
            clusters.append([idx])
    varsigma = np.array([varsigma_raw[c].mean() for c in clusters])
    projections = [phi[:, c] @ phi[:, c].conj().T for c in clusters]
    cluster_of = np.empty(len(p_env), dtype=int)
    for ci, c in enumerate(clusters):
        for i in c:
            cluster_of[i] = ci

    atoms, _ = interaction_kraus_atoms(u, rho_env, d_sys, floor=tol.prob_floor)
    grouped = {}
    for i, j, k in atoms:
        grouped.setdefault((cluster_of[i], cluster_of[j]), []).append(k)

    outcomes = []
    for ci in range(len(clusters)):
        for cj in range(len(clusters)):
            ks = np.stack(grouped.get((ci, cj), [np.zeros((d_sys, d_sys), dtype=complex)]))
            outcomes.append(Outcome(
                index=len(outcomes),
                s_initial=float(varsigma[ci]),
                s_final=float(varsigma[cj]),
                delta=float(varsigma[cj] - varsigma[ci]),
                kraus=ks,
                superop=superop_from_kraus(ks),
                prob_op=np.einsum("xji,xjk->ik", ks.conj(), ks),
            ))
    return UnravelingEntry(label=label, s_env=s_env, varsigma=varsigma,
                           projections=projections, outcomes=outcomes,
                           kms_residual=kms_residual)


# ---------------------------------------------------------------------------
# the model
# ---------------------------------------------------------------------------

@dataclass
class MrisModel:
    h_sys: np.ndarray
    chain: MarkovChain
    probes: dict
    rho_init: dict
    tri: TimeReversalData = None
    tol: Tolerances = DEFAULT
    # derived, filled by build_model
    rho_env: dict = None
    free_energy: dict = None
    u: dict = None
    channels: dict = None
    unravelings: dict = None
    flux: dict = None
    caches: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def labels(self):
        return self.chain.labels

    @property
    def dim_sys(self) -> int:
        return self.h_sys.shape[0]

    def dim_env(self, label) -> int:
        return self.probes[label].h_env.shape[0]

    @property
    def generator(self) -> extended.ExtendedGenerator:
        if "generator" not in self.caches:
            self.caches["generator"] = extended.build_generator(
                self.chain, self.channels, self.tol)
        return self.caches["generator"]

    def ess(self):
        """(R_+, residual), cached."""
        if "ess" not in self.caches:
            self.caches["ess"] = extended.find_ess(self.generator, self.tol)
        return self.caches["ess"]

    def initial_state(self) -> extended.ExtendedState:
        return extended.initial_extended_state(self.chain, self.rho_init)


def build_model(h_sys, chain: MarkovChain, probes: dict, rho_init: dict,
                tri: TimeReversalData = None, tol: Tolerances = DEFAULT) -> MrisModel:
    """Assemble and validate every derived object of an MRIS model."""
    h_sys = check_hermitian(h_sys, tol.herm, "system hamiltonian")
    d = h_sys.shape[0]
    for label in chain.labels:
        if label not in probes:
            raise ModelError(f"no probe for chain label {label!r}")
        if label not in rho_init:
            raise ModelError(f"no initial state for chain label {label!r}")

    model = MrisModel(h_sys=h_sys, chain=chain, probes=dict(probes),
                      rho_init={l: check_density_matrix(rho_init[l], tol, f"rho_init[{l!r}]")
                                for l in chain.labels},
                      tri=tri, tol=tol,
                      rho_env={}, free_energy={}, u={}, channels={},
                      unravelings={}, flux={})

    for label in chain.labels:
        spec = probes[label]
        h_env = check_hermitian(spec.h_env, tol.herm, f"probe hamiltonian {label!r}")
        v = check_hermitian(spec.coupling, tol.herm, f"coupling {label!r}")
        d_env = h_env.shape[0]
        if v.shape != (d * d_env, d * d_env):
            raise ModelError(
                f"coupling {label!r} has shape {v.shape}, expected {(d * d_env,) * 2}")
        rho_e, f_e = thermal_state(h_env, spec.beta, tol)
        h_total = tensor(h_sys, np.eye(d_env)) + tensor(np.eye(d), h_env) + v
        u = propagator(h_total, spec.tau, tol)
        channel = reduced_channel(u, rho_e, d, tol)
        unrav = _build_unraveling(label, u, rho_e, h_env, spec.beta, f_e, d, tol)
        comp = unrav.completeness_residual(channel)
        if comp > 1e-12:
            raise ModelError(f"unraveling of {label!r} does not resum to the channel "
                             f"(residual {comp:.3e})")
        model.rho_env[label] = rho_e
        model.free_energy[label] = f_e
        model.u[label] = u
        model.channels[label] = channel
        model.unravelings[label] = unrav
        model.flux[label] = _flux_matrix(u, h_env, rho_e, d)
    return model


def reduced_channel(u, rho_env, d_sys, tol: Tolerances = DEFAULT) -> QuantumChannel:
    """Reduced one-step channel with its CPTP certificate enforced."""
    atoms, _ = interaction_kraus_atoms(u, rho_env, d_sys, floor=tol.prob_floor)
    channel = channel_from_kraus([k for _, _, k in atoms], tol)
    report = choi_verify(channel)
    if report["min_choi_eig"] < -tol.psd or report["tp_residual"] > tol.tp:
        raise ModelError(f"reduced map failed its CPTP certificate: {report}")
    return channel


# ---------------------------------------------------------------------------
# fluxes
# ---------------------------------------------------------------------------

def _flux_matrix(u, h_env, rho_env, d_sys) -> np.ndarray:
    """J = tr_env( U* [U, 1 (x) H_env] (1 (x) rho_env) ).

    <rho, J> is the energy flowing out of the probe into the system during one
    interaction started from rho; the heat dumped into the probe is -<rho, J>.
    """
    d_env = h_env.shape[0]
    h_tilde = tensor(np.eye(d_sys), h_env)
    rho_tilde = tensor(np.eye(d_sys), rho_env)
    j = partial_trace_env(u.conj().T @ (u @ h_tilde - h_tilde @ u) @ rho_tilde,
                          d_sys, d_env)
    j = (j + j.conj().T) / 2
    return j


def _entropy_flux_matrix(u, s_env, rho_env, d_sys) -> np.ndarray:
    """J_S = tr_env( U* [1 (x) S_env, U] (1 (x) rho_env) ); note the reversed
    commutator relative to the energy flux.  <rho, J_S> is the entropy dumped
    into the reservoir in one step."""
    d_env = s_env.shape[0]
    s_tilde = tensor(np.eye(d_sys), s_env)
    rho_tilde = tensor(np.eye(d_sys), rho_env)
    j = partial_trace_env(u.conj().T @ (s_tilde @ u - u @ s_tilde) @ rho_tilde,
                          d_sys, d_env)
    j = (j + j.conj().T) / 2
    return j


def flux_observable(model: MrisModel, omega) -> np.ndarray:
    """Energy-flux observable J(omega) on the system."""
    return model.flux[omega]


def flux_extended(model: MrisModel, nu) -> extended.ExtendedObservable:
    """The extended observable with J(nu) in block nu and zero elsewhere."""
    d = model.dim_sys
    blocks = np.zeros((model.chain.n, d, d), dtype=complex)
    blocks[model.chain.index(nu)] = model.flux[nu]
    return extended.ExtendedObservable(model.labels, blocks)


def entropy_flux_observable(model: MrisModel) -> extended.ExtendedObservable:
    """Blockwise entropy-flux observable J_S; for thermal probes each block
    equals -beta_w J(w) (checked in the tests, not assumed here)."""
    blocks = np.stack([
        _entropy_flux_matrix(model.u[l], model.unravelings[l].s_env,
                             model.rho_env[l], model.dim_sys)
        for l in model.labels])
    return extended.ExtendedObservable(model.labels, blocks)


def unraveling(model: MrisModel, omega) -> UnravelingEntry:
    return model.unravelings[omega]


# ---------------------------------------------------------------------------
# assumption checks
# ---------------------------------------------------------------------------

def check_tri(model: MrisModel) -> dict:
    """Time-reversal invariance in the conjugation representation.

    With theta = (entrywise conjugation) o W, the two conditions are
    W_env conj(H_env) = H_env W_env and
    (W_sys (x) W_env) conj(U) = U^dagger (W_sys (x) W_env),
    plus the involution property conj(W) W = 1 for every W.
    """
    d = model.dim_sys
    tri = model.tri
    if tri is None:
        tri = TimeReversalData(np.eye(d), {l: np.eye(model.dim_env(l)) for l in model.labels})
    residuals = {}
    residuals["involution_sys"] = float(
        np.abs(tri.w_sys.conj() @ tri.w_sys - np.eye(d)).max())
    worst = residuals["involution_sys"]
    for label in model.labels:
        w_e = tri.w_env[label]
        h_e = model.probes[label].h_env
        u = model.u[label]
        big_w = tensor(tri.w_sys, w_e)
        r_inv = float(np.abs(w_e.conj() @ w_e - np.eye(w_e.shape[0])).max())
        r_h = float(np.abs(w_e @ h_e.conj() - h_e @ w_e).max())
        r_u = float(np.abs(big_w @ u.conj() - u.conj().T @ big_w).max())
        residuals[f"involution_env[{label!r}]"] = r_inv
        residuals[f"h_env[{label!r}]"] = r_h
        residuals[f"propagator[{label!r}]"] = r_u
        worst = max(worst, r_inv, r_h, r_u)
    return {"holds": worst <= 1e-10, "max_residual": worst, "residuals": residuals}


def check_equilibrium(model: MrisModel, decomp: "extended.EssDecomposition" = None) -> dict:
    """Joint-invariance test of the steady state family.

    Equilibrium means U_w (rho_+v (x) rho_env_w) U_w* = rho_+w (x) rho_env_w
    for every chain edge v -> w; the report carries the worst residual, the
    steady entropy production <R_+, J_S>, and the steady energy fluxes.
    """
    g = model.generator
    r_plus, _ = model.ess()
    if decomp is None:
        decomp = extended.ess_decompose(g, r_plus, model.tol)
    labels = model.labels
    worst = 0.0
    for vi, v in enumerate(labels):
        for wi, w in enumerate(labels):
            if model.chain.P[vi, wi] <= model.tol.edge:
                continue
            u = model.u[w]
            lhs = u @ tensor(decomp.rho_plus[v], model.rho_env[w]) @ u.conj().T
            rhs = tensor(decomp.rho_plus[w], model.rho_env[w])
            worst = max(worst, float(np.abs(lhs - rhs).max()))
    j_s = entropy_flux_observable(model)
    ep_rate = extended.expectation(r_plus, j_s)
    fluxes = {l: extended.expectation(r_plus, flux_extended(model, l)) for l in labels}
    return {
        "is_equilibrium": worst <= 1e-8,
        "max_residual": worst,
        "entropy_production_rate": ep_rate,
        "steady_fluxes": fluxes,
    }


def temperature_deform(model: MrisModel, zeta) -> MrisModel:
    """Rebuild the model with probe temperatures beta_w - zeta_w.

    The propagators do not depend on the probe temperature, so only the probe
    states (and everything downstream of them) change.
    """
    zeta = np.asarray(zeta, dtype=float)
    if zeta.shape != (model.chain.n,):
        raise ModelError(f"zeta must have one entry per label, got {zeta.shape}")
    new_probes = {}
    for k, label in enumerate(model.labels):
        spec = model.probes[label]
        beta = spec.beta - zeta[k]
        if beta <= 0:
            raise ModelError(
                f"deformed inverse temperature for {label!r} is {beta} <= 0")
        new_probes[label] = ProbeSpec(h_env=spec.h_env, beta=beta,
                                      tau=spec.tau, coupling=spec.coupling)
    return build_model(model.h_sys, model.chain, new_probes, model.rho_init,
                       tri=model.tri, tol=model.tol)


# ---------------------------------------------------------------------------
# one-step entropy balance
# ---------------------------------------------------------------------------

def one_step_balance(u, rho_env, rho, h_env=None, beta=None) -> dict:
    """Entropy bookkeeping for a single interaction from state rho.

    Returns the system entropies before/after, the entropy dumped into the
    reservoir <rho, J_S>, the entropy production (relative entropy of the
    post-interaction joint state w.r.t. the decoupled reference), and the
    residual of  S(L rho) - S(rho) + <rho, J_S> = ep.  When (h_env, beta) are
    given, also reports the heat dQ = -<rho, J> and the residual of the
    thermal form  S(L rho) - S(rho) + beta dQ = ep.
    """
    rho = np.asarray(rho, dtype=complex)
    d_sys = rho.shape[0]
    d_env = rho_env.shape[0]
    w_env, phi = np.linalg.eigh(rho_env)
    if w_env.min() <= 1e-14:
        raise ModelError("probe state must be faithful for the balance identity")
    s_env = (phi * (-np.log(w_env))) @ phi.conj().T

    joint = u @ tensor(rho, rho_env) @ u.conj().T
    after = partial_trace_env(joint, d_sys, d_env)
    s_before = entropy_vn(rho)
    s_after = entropy_vn(after)
    flux_s = float(np.real(np.trace(joint @ tensor(np.eye(d_sys), s_env))
                           - np.trace(rho_env @ s_env)))
    ep = relative_entropy(joint, tensor(after, rho_env))
    out = {
        "s_before": s_before,
        "s_after": s_after,
        "entropy_flux": flux_s,
        "ep": ep,
        "balance_residual": (abs(s_after - s_before + flux_s - ep)
                             if math.isfinite(ep) else math.inf),
    }
    if h_env is not None and beta is not None:
        heat = float(np.real(np.trace(joint @ tensor(np.eye(d_sys), h_env))
                             - np.trace(rho_env @ h_env)))
        out["dq"] = heat
        out["thermal_residual"] = (abs(s_after - s_before + beta * heat - ep)
                                   if math.isfinite(ep) else math.inf)
    return out
