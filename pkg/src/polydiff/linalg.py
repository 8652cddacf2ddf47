"""Exact linear algebra over the rationals on sparse rows.

Rows are ``dict[int, Fraction]`` (column -> nonzero coefficient).  Elimination
is incremental and keeps the pivot rows fully reduced, so the result is the
reduced row-echelon form and therefore canonical for a fixed column order.
"""

from fractions import Fraction


def _axpy(row, coef, other):
    """row -= coef * other, in place, dropping exact zeros."""
    for col, val in other.items():
        new = row.get(col, 0) - coef * val
        if new:
            row[col] = new
        else:
            row.pop(col, None)


class RowEchelon:
    """Incrementally maintained reduced row-echelon form.

    >>> ech = RowEchelon(3)
    >>> ech.add({0: Fraction(1), 1: Fraction(2)})
    True
    >>> ech.add({0: Fraction(2), 1: Fraction(4)})
    False
    >>> ech.rank
    1
    """

    def __init__(self, ncols):
        self.ncols = ncols
        self.pivots = {}

    @property
    def rank(self):
        return len(self.pivots)

    def reduce(self, row):
        row = {c: Fraction(v) for c, v in row.items() if v}
        hits = [c for c in row if c in self.pivots]
        for col in hits:
            coef = row.get(col)
            if coef:
                _axpy(row, coef, self.pivots[col])
        return row

    def add(self, row):
        """Insert a row; return True if it increased the rank."""
        row = self.reduce(row)
        if not row:
            return False
        col = min(row)
        inv = 1 / row[col]
        row = {c: v * inv for c, v in row.items()}
        for other in self.pivots.values():
            coef = other.get(col)
            if coef:
                _axpy(other, coef, row)
        self.pivots[col] = row
        return True

    def nullspace(self):
        """Basis of the kernel, one vector per free column (canonical)."""
        free = [c for c in range(self.ncols) if c not in self.pivots]
        basis = []
        for f in free:
            vec = {f: Fraction(1)}
            for p, row in self.pivots.items():
                v = row.get(f)
                if v:
                    vec[p] = -v
            basis.append(vec)
        return basis


def nullspace(rows, ncols):
    """Exact kernel basis of the matrix given by sparse ``rows``."""
    ech = RowEchelon(ncols)
    for row in rows:
        ech.add(row)
    return ech.nullspace()


def rank(rows, ncols):
    ech = RowEchelon(ncols)
    for row in rows:
        ech.add(row)
    return ech.rank


def solve(rows, rhs, ncols):
    """One exact solution of ``A x = rhs`` (free unknowns set to zero) or None."""
    aug = ncols
    ech = RowEchelon(ncols + 1)
    for row, b in zip(rows, rhs):
        r = dict(row)
        if b:
            r[aug] = Fraction(b)
        ech.add(r)
    if aug in ech.pivots:
        return None
    x = [Fraction(0)] * ncols
    for p, row in ech.pivots.items():
        x[p] = row.get(aug, Fraction(0))
    return x
