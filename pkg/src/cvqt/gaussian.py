"""Covariance-matrix model of the teleportation circuit.

This is an independent check on the Fock-space simulation: the same circuit
(beam splitter, two homodyne detections, linear feed-forward) is propagated
through first and second moments only. Quadratures are ordered
``(x_0, p_0, x_1, p_1, ...)`` and the vacuum covariance is ``I / 2``.
"""

from __future__ import annotations

import numpy as np


def rotation(theta: float) -> np.ndarray:
    """Quadrature map of ``exp(i theta n)`` acting on a state."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def coherent_moments(alpha: float, phi: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    amp = alpha * np.exp(1j * phi)
    return np.sqrt(2) * np.array([amp.real, amp.imag]), 0.5 * np.eye(2)


def tmsv_moments(eta: float, phase: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Moments of ``sqrt(1-eta^2) sum eta^n e^{i n phase} |n n>``.

    With ``eta = tanh(r)`` and zero phase, ``x_0 - x_1`` and ``p_0 + p_1`` are
    the squeezed combinations.
    """
    r = np.arctanh(eta)
    c, s = np.cosh(2 * r), np.sinh(2 * r)
    z = np.diag([1.0, -1.0])
    cov = 0.5 * np.block([[c * np.eye(2), s * z], [s * z, c * np.eye(2)]])
    rot = np.eye(4)
    rot[:2, :2] = rotation(phase)
    return np.zeros(4), rot @ cov @ rot.T


def beam_splitter_map(r: float, t: float) -> np.ndarray:
    """Quadrature map of ``a_j -> t a_j + i r a_k``, ``a_k -> i r a_j + t a_k``."""
    return np.array(
        [
            [t, 0, 0, -r],
            [0, t, r, 0],
            [0, -r, t, 0],
            [r, 0, 0, t],
        ]
    )


def _direct_sum(*blocks):
    size = sum(b.shape[0] for b in blocks)
    out = np.zeros((size, size))
    i = 0
    for b in blocks:
        n = b.shape[0]
        out[i : i + n, i : i + n] = b
        i += n
    return out


def teleported_moments(
    alpha: float,
    phi: float,
    eta: float,
    resource_phase: float,
    lo_angle: float,
    gain: float = 1.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Moments of Bob's output averaged over all measurement outcomes.

    Modes: 0 = input, 1 = Alice's half of the pair, 2 = Bob's half. Alice
    mixes 0 and 1 on a balanced splitter and measures ``x_lo_angle`` on both
    outputs (``u`` on port 0, ``v`` on port 1); Bob displaces mode 2 by
    ``gain * exp(i lo_angle) * (u - i v)``. Because the outcomes are
    commuting observables on other modes, Bob's output quadratures are a
    linear function of the input quadratures.
    """
    mu_in, cov_in = coherent_moments(alpha, phi)
    mu_res, cov_res = tmsv_moments(eta, resource_phase)
    mu = np.concatenate([mu_in, mu_res])
    cov = _direct_sum(cov_in, cov_res)

    bs = np.eye(6)
    bs[:4, :4] = beam_splitter_map(np.sqrt(0.5), np.sqrt(0.5))
    mu, cov = bs @ mu, bs @ cov @ bs.T

    c, s = np.cos(lo_angle), np.sin(lo_angle)
    u = np.array([c, s, 0, 0, 0, 0])
    v = np.array([0, 0, c, s, 0, 0])
    re_beta = gain * (c * u + s * v)
    im_beta = gain * (s * u - c * v)
    lin = np.zeros((2, 6))
    lin[0, 4] = lin[1, 5] = 1.0
    lin[0] += np.sqrt(2) * re_beta
    lin[1] += np.sqrt(2) * im_beta
    return lin @ mu, lin @ cov @ lin.T


def overlap_fidelity(mu1, cov1, mu2, cov2) -> float:
    """Fidelity of two single-mode Gaussian states, at least one of them pure."""
    total = np.asarray(cov1) + np.asarray(cov2)
    d = np.asarray(mu1) - np.asarray(mu2)
    return float(np.exp(-0.5 * d @ np.linalg.solve(total, d)) / np.sqrt(np.linalg.det(total)))


def teleport_fidelity(
    alpha: float,
    phi: float,
    eta: float,
    resource_phase: float = 0.0,
    lo_angle: float | None = None,
    gain: float = 1.0,
) -> float:
    """Average fidelity of the teleported output with the coherent input.

    ``lo_angle`` defaults to ``resource_phase / 2 - pi / 4``, the angle at
    which the measured combinations are the EPR-correlated ones.
    """
    if lo_angle is None:
        lo_angle = resource_phase / 2 - np.pi / 4
    mu, cov = teleported_moments(alpha, phi, eta, resource_phase, lo_angle, gain)
    return overlap_fidelity(mu, cov, *coherent_moments(alpha, phi))
