from __future__ import annotations

import numpy as np


class IndefiniteMatrixError(ValueError):
    """Matrix has an eigenvalue clearly below zero."""


def psd_sqrt(C, hermitian_tol: float = 1e-10, neg_tol: float = 1e-8) -> np.ndarray:
    """Principal square root ``S`` of a Hermitian PSD matrix, ``S @ S^H = C``.

    Eigenvalues in ``[-neg_tol * trace, 0)`` are treated as round-off and
    clamped to zero; anything more negative raises
    :class:`IndefiniteMatrixError`.
    """
    C = np.asarray(C)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ValueError("expected a square matrix")
    scale = max(1.0, float(np.max(np.abs(C), initial=0.0)))
    if np.max(np.abs(C - C.conj().T), initial=0.0) > hermitian_tol * scale:
        raise ValueError("matrix is not Hermitian")
    H = 0.5 * (C + C.conj().T)
    w, V = np.linalg.eigh(H)
    tr = float(np.real(np.trace(H)))
    if w.size and w.min() < -neg_tol * max(tr, 0.0):
        raise IndefiniteMatrixError(f"eigenvalue {w.min():.3g} below -{neg_tol}*trace")
    S = (V * np.sqrt(np.clip(w, 0.0, None))) @ V.conj().T
    return S.real.copy() if np.isrealobj(C) else S
