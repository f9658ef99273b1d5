"""Parameter container for the mixed graphical model.

Storage layout
--------------
``beta``  (p, p) symmetric, couplings between continuous variables.
``alpha`` (p,)   continuous node potentials.
``rho``   (p, M) continuous-discrete couplings; columns are the stacked
          levels of all discrete variables (M = sum L_j).
``phi``   (M, M) symmetric discrete-discrete couplings. Inside a diagonal
          block (r, r) only the diagonal is used: ``phi[l, l]`` is the node
          potential of level l, off-diagonal entries of that block stay 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .data import VariableSchema
from .errors import DataError

FORMAT_VERSION = 1


@dataclass
class Theta:
    schema: VariableSchema
    beta: np.ndarray
    alpha: np.ndarray
    rho: np.ndarray
    phi: np.ndarray

    @classmethod
    def zeros(cls, schema: VariableSchema, beta_diag: float = 1.0) -> "Theta":
        p, M = schema.p, schema.n_indicators
        return cls(schema, np.eye(p) * beta_diag, np.zeros(p), np.zeros((p, M)), np.zeros((M, M)))

    @property
    def p(self) -> int:
        return self.schema.p

    @property
    def q(self) -> int:
        return self.schema.q

    def copy(self) -> "Theta":
        return replace(self, beta=self.beta.copy(), alpha=self.alpha.copy(),
                       rho=self.rho.copy(), phi=self.phi.copy())

    def _slice(self, j: int) -> slice:
        o = self.schema.offsets
        return slice(o[j], o[j + 1])

    def rho_block(self, s: int, j: int) -> np.ndarray:
        return self.rho[s, self._slice(j)]

    def phi_block(self, r: int, j: int) -> np.ndarray:
        return self.phi[self._slice(r), self._slice(j)]

    def set_phi_block(self, r: int, j: int, block) -> None:
        block = np.asarray(block, dtype=float)
        if r == j:
            raise ValueError("use node potentials (diagonal) for r == j")
        self.phi[self._slice(r), self._slice(j)] = block
        self.phi[self._slice(j), self._slice(r)] = block.T

    def node_potential(self, r: int) -> np.ndarray:
        return np.diag(self.phi)[self._slice(r)].copy()

    def check(self, tol: float = 1e-12) -> None:
        s = self.schema
        if self.beta.shape != (s.p, s.p) or self.alpha.shape != (s.p,):
            raise DataError("beta/alpha shape does not match schema")
        if self.rho.shape != (s.p, s.n_indicators) or self.phi.shape != (s.n_indicators,) * 2:
            raise DataError("rho/phi shape does not match schema")
        if np.max(np.abs(self.beta - self.beta.T), initial=0.0) > tol:
            raise DataError("beta is not symmetric")
        if np.max(np.abs(self.phi - self.phi.T), initial=0.0) > tol:
            raise DataError("phi is not symmetric")
        if np.any(np.diag(self.beta) <= 0):
            raise DataError("beta diagonal must be strictly positive")

    def to_baseline_form(self) -> "Theta":
        """Equivalent parameters with every baseline-indexed entry at zero.

        The pseudo-likelihood (and the joint density) are invariant under this
        reparameterization: level-constant shifts of rho move into alpha, row
        and column shifts of phi blocks move into node potentials.
        """
        t = self.copy()
        s = self.schema
        o = s.offsets
        for j, b in enumerate(s.baselines):
            sl = slice(o[j], o[j + 1])
            shift = t.rho[:, o[j] + b].copy()
            t.rho[:, sl] -= shift[:, None]
            t.alpha += shift
        for r in range(s.q):
            for j in range(s.q):
                if r == j:
                    continue
                blk = t.phi_block(r, j).copy()
                br, bj = s.baselines[r], s.baselines[j]
                row = blk[br, :].copy()  # depends on level of j only
                blk -= row[None, :]
                idx_j = np.arange(o[j], o[j + 1])
                t.phi[idx_j, idx_j] += row
                col = blk[:, bj].copy()  # depends on level of r only
                blk -= col[:, None]
                idx_r = np.arange(o[r], o[r + 1])
                t.phi[idx_r, idx_r] += col
                t.set_phi_block(r, j, blk)
        for j, b in enumerate(s.baselines):
            idx = np.arange(o[j], o[j + 1])
            t.phi[idx, idx] -= t.phi[o[j] + b, o[j] + b]
        return t

    # -- serialization -------------------------------------------------

    def to_dict(self) -> dict:
        s = self.schema
        return {
            "format": "mixgm-theta",
            "version": FORMAT_VERSION,
            "schema": s.to_dict(),
            "dimensions": {"p": s.p, "q": s.q, "levels": list(s.n_levels)},
            "beta": self.beta.tolist(),
            "alpha": self.alpha.tolist(),
            "rho": self.rho.tolist(),
            "phi": self.phi.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Theta":
        if d.get("format") != "mixgm-theta":
            raise DataError("not a theta file")
        schema = VariableSchema.from_dict(d["schema"])
        p, M = schema.p, schema.n_indicators
        t = cls(
            schema,
            np.array(d["beta"], dtype=float).reshape(p, p),
            np.array(d["alpha"], dtype=float).reshape(p),
            np.array(d["rho"], dtype=float).reshape(p, M),
            np.array(d["phi"], dtype=float).reshape(M, M),
        )
        t.check()
        return t

    def save(self, path) -> None:
        # json writes floats with repr(): shortest string that round-trips exactly
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path) -> "Theta":
        return cls.from_dict(json.loads(Path(path).read_text()))
