"""Conic program container, solve report, and the sparse-triplet dump format."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .cones import ConeBlock

OPTIMAL = "Optimal"
MAX_ITERATIONS = "MaxIterations"
INFEASIBLE = "Infeasible"
UNBOUNDED = "Unbounded"


@dataclass
class ConicProgram:
    """``minimize c @ x  subject to  A @ x == b,  x[block] in K_block``.

    ``cones`` is a list of ``(ConeBlock, start)`` pairs; the block occupies
    ``x[start:start + block.size]``. Variables outside every block are free.
    """

    c: np.ndarray
    A: sp.csr_matrix
    b: np.ndarray
    cones: list = field(default_factory=list)

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        self.A = sp.csr_matrix(self.A, dtype=float)
        self.b = np.asarray(self.b, dtype=float).ravel()
        n = self.c.size
        if self.A.shape[1] != n:
            raise ValueError(f"A has {self.A.shape[1]} columns, expected {n}")
        if self.A.shape[0] != self.b.size:
            raise ValueError("b length does not match the row count of A")
        owner = np.full(n, -1)
        for k, (block, start) in enumerate(self.cones):
            if not isinstance(block, ConeBlock):
                raise TypeError("cones must hold (ConeBlock, start) pairs")
            stop = start + block.size
            if start < 0 or stop > n:
                raise ValueError(f"cone block {k} exceeds the variable range")
            if np.any(owner[start:stop] >= 0):
                raise ValueError(f"cone block {k} overlaps another block")
            owner[start:stop] = k

    @property
    def nvars(self) -> int:
        return self.c.size

    @property
    def nrows(self) -> int:
        return self.b.size

    def coned_mask(self) -> np.ndarray:
        mask = np.zeros(self.nvars, dtype=bool)
        for block, start in self.cones:
            mask[start:start + block.size] = True
        return mask

    def dump(self, path) -> None:
        """Write the program in the sparse-triplet text format.

        Layout::

            rows cols nnz
            i j value            (nnz lines, 0-based)
            b                    (rows values, one line)
            c                    (cols values, one line)
            ncones
            kind start size alpha   (alpha is '-' unless kind == power)
        """
        A = self.A.tocoo()
        order = np.lexsort((A.col, A.row))
        lines = [f"{A.shape[0]} {A.shape[1]} {A.nnz}"]
        lines += [f"{A.row[k]} {A.col[k]} {float(A.data[k])!r}" for k in order]
        lines.append(" ".join(repr(float(v)) for v in self.b))
        lines.append(" ".join(repr(float(v)) for v in self.c))
        lines.append(str(len(self.cones)))
        for block, start in self.cones:
            alpha = "-" if block.alpha is None else repr(float(block.alpha))
            lines.append(f"{block.kind} {start} {block.size} {alpha}")
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "ConicProgram":
        text = Path(path).read_text().splitlines()
        rows, cols, nnz = map(int, text[0].split())
        trip = [line.split() for line in text[1:1 + nnz]]
        i = np.array([int(t[0]) for t in trip], dtype=int)
        j = np.array([int(t[1]) for t in trip], dtype=int)
        v = np.array([float(t[2]) for t in trip])
        A = sp.csr_matrix((v, (i, j)), shape=(rows, cols))
        pos = 1 + nnz
        b = np.array(text[pos].split(), dtype=float) if rows else np.zeros(0)
        c = np.array(text[pos + 1].split(), dtype=float)
        ncones = int(text[pos + 2])
        cones = []
        for line in text[pos + 3:pos + 3 + ncones]:
            kind, start, size, alpha = line.split()
            block = ConeBlock(kind, int(size), None if alpha == "-" else float(alpha))
            cones.append((block, int(start)))
        return cls(c, A, b, cones)


@dataclass
class SolveReport:
    status: str
    x: np.ndarray
    y: np.ndarray
    objective_value: float
    primal_residual: float
    dual_residual: float
    gap: float
    iterations: int
    # dual slack on the coned variables, c - A^T y restricted to the blocks
    z: np.ndarray | None = None

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL
