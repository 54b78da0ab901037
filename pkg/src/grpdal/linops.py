"""Linear operators with exact adjoints and diagonal metrics.

Images are stored as flattened row-major vectors of length ``h * w``.
"""

import numpy as np

from .errors import InvalidArgument


def _check_dim(v, n, what):
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.shape[0] != n:
        raise InvalidArgument(f"{what}: expected vector of length {n}, got shape {v.shape}")
    return v


class LinearOperator:
    """Base class: subclasses implement ``_apply`` and ``_adjoint``."""

    kind = "abstract"

    def __init__(self, in_dim, out_dim):
        if in_dim < 1 or out_dim < 1:
            raise InvalidArgument("operator dimensions must be positive")
        self.in_dim = int(in_dim)
        self.out_dim = int(out_dim)

    @property
    def shape(self):
        return (self.out_dim, self.in_dim)

    def apply(self, x):
        return self._apply(_check_dim(x, self.in_dim, f"{self.kind}.apply"))

    def adjoint(self, y):
        return self._adjoint(_check_dim(y, self.out_dim, f"{self.kind}.adjoint"))

    def to_dense(self):
        """Materialize the matrix column by column (small sizes only)."""
        cols = [self._apply(e) for e in np.eye(self.in_dim)]
        return np.column_stack(cols)

    def __repr__(self):
        return f"{type(self).__name__}({self.out_dim}x{self.in_dim})"


class DenseOperator(LinearOperator):
    kind = "dense-matrix"

    def __init__(self, matrix):
        matrix = np.array(matrix, dtype=float)
        if matrix.ndim != 2:
            raise InvalidArgument("dense operator needs a 2-D matrix")
        super().__init__(matrix.shape[1], matrix.shape[0])
        self.matrix = matrix
        self.matrix.setflags(write=False)

    @classmethod
    def identity(cls, n):
        return cls(np.eye(n))

    def _apply(self, x):
        return self.matrix @ x

    def _adjoint(self, y):
        return self.matrix.T @ y

    def to_dense(self):
        return self.matrix.copy()


def _average_matrix(n, window):
    """1-D moving average over ``window`` samples with replicate padding."""
    r = window // 2
    B = np.zeros((n, n))
    rows = np.arange(n)
    for off in range(-r, r + 1):
        cols = np.clip(rows + off, 0, n - 1)
        np.add.at(B, (rows, cols), 1.0 / window)
    return B


class BlurOperator(LinearOperator):
    """Averaging blur over a ``window x window`` neighbourhood, replicate padding.

    The 2-D box filter with replicate padding factors into a row average and a
    column average, so ``K X = Bh X Bw^T`` and ``K^* Y = Bh^T Y Bw``.
    """

    kind = "averaging-blur"

    def __init__(self, height, width, window=9):
        if window < 1 or window % 2 == 0:
            raise InvalidArgument(f"blur window must be odd and positive, got {window}")
        if height < 2 or width < 2:
            raise InvalidArgument("image must be at least 2x2")
        super().__init__(height * width, height * width)
        self.height, self.width, self.window = height, width, window
        self.half_width = window // 2
        self._Bh = _average_matrix(height, window)
        self._Bw = _average_matrix(width, window)

    def _apply(self, x):
        X = x.reshape(self.height, self.width)
        return (self._Bh @ X @ self._Bw.T).ravel()

    def _adjoint(self, y):
        Y = y.reshape(self.height, self.width)
        return (self._Bh.T @ Y @ self._Bw).ravel()


class GradientOperator(LinearOperator):
    """Forward differences; the last row/column difference is zero.

    Output layout: vertical differences (``h*w``) followed by horizontal ones.
    """

    kind = "forward-difference-gradient"

    def __init__(self, height, width):
        if height < 2 or width < 2:
            raise InvalidArgument("image must be at least 2x2")
        super().__init__(height * width, 2 * height * width)
        self.height, self.width = height, width

    def _apply(self, x):
        X = x.reshape(self.height, self.width)
        dv = np.zeros_like(X)
        dh = np.zeros_like(X)
        dv[:-1, :] = X[1:, :] - X[:-1, :]
        dh[:, :-1] = X[:, 1:] - X[:, :-1]
        return np.concatenate([dv.ravel(), dh.ravel()])

    def _adjoint(self, y):
        n = self.height * self.width
        dv = y[:n].reshape(self.height, self.width)
        dh = y[n:].reshape(self.height, self.width)
        out = np.zeros((self.height, self.width))
        out[:-1, :] -= dv[:-1, :]
        out[1:, :] += dv[:-1, :]
        out[:, :-1] -= dh[:, :-1]
        out[:, 1:] += dh[:, :-1]
        return out.ravel()


class StackOperator(LinearOperator):
    """Vertical stack ``[s_1 A_1; s_2 A_2; ...]`` of operators sharing an input space."""

    kind = "scaled-stack"

    def __init__(self, parts):
        parts = [(float(s), op) for s, op in parts]
        if not parts:
            raise InvalidArgument("stack needs at least one part")
        in_dim = parts[0][1].in_dim
        if any(op.in_dim != in_dim for _, op in parts):
            raise InvalidArgument("all stacked operators must share the input dimension")
        super().__init__(in_dim, sum(op.out_dim for _, op in parts))
        self.parts = parts
        self.offsets = np.cumsum([0] + [op.out_dim for _, op in parts])

    def _apply(self, x):
        return np.concatenate([s * op._apply(x) for s, op in self.parts])

    def _adjoint(self, y):
        out = np.zeros(self.in_dim)
        for (s, op), lo, hi in zip(self.parts, self.offsets[:-1], self.offsets[1:]):
            out += s * op._adjoint(y[lo:hi])
        return out

    def split(self, y):
        """Split a vector of the output space into per-part blocks."""
        return [y[lo:hi] for lo, hi in zip(self.offsets[:-1], self.offsets[1:])]


class Metric:
    """Diagonal symmetric positive definite matrix ``D = diag(d)``."""

    def __init__(self, diagonal):
        d = np.array(diagonal, dtype=float).ravel()
        if d.size == 0 or not np.all(np.isfinite(d)) or np.any(d <= 0):
            raise InvalidArgument("metric weights must be finite and strictly positive")
        d.setflags(write=False)
        self.diagonal = d
        self.lam = float(d.min())
        self.Lam = float(d.max())

    @classmethod
    def identity(cls, n):
        return cls(np.ones(n))

    @classmethod
    def blocks(cls, sizes_and_weights):
        """Block-diagonal metric from ``[(size, weight), ...]``."""
        return cls(np.concatenate([np.full(int(n), float(w)) for n, w in sizes_and_weights]))

    @property
    def dim(self):
        return self.diagonal.size

    def _check(self, v):
        return _check_dim(v, self.dim, "metric")

    def apply(self, v):
        return self.diagonal * self._check(v)

    def solve(self, v):
        return self._check(v) / self.diagonal

    def inner(self, u, v):
        return float(np.dot(self._check(u), self.diagonal * self._check(v)))

    def norm(self, v):
        v = self._check(v)
        return float(np.sqrt(np.dot(v, self.diagonal * v)))

    def is_identity(self):
        return self.lam == 1.0 and self.Lam == 1.0

    def __repr__(self):
        return f"Metric(dim={self.dim}, lam={self.lam:g}, Lam={self.Lam:g})"


def weighted_norm(m, v):
    return m.norm(v)


def weighted_inner(m, u, v):
    return m.inner(u, v)


def operator_norm_in_metric(A, T=None, iters=200, seed=0):
    """Estimate ``sup_y ||A^* y|| / ||y||_T`` by power iteration.

    This is the largest singular value of ``A^* T^{-1/2}``. The Rayleigh
    quotient of the power iterate is returned, so the estimate never exceeds
    the true norm and is nondecreasing in ``iters``.
    """
    if iters < 1:
        raise InvalidArgument("iters must be >= 1")
    m = A.out_dim
    tinv_sqrt = np.ones(m) if T is None else 1.0 / np.sqrt(T.diagonal)
    if tinv_sqrt.size != m:
        raise InvalidArgument("metric dimension does not match the operator output")
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(m)
    w /= np.linalg.norm(w)
    est = 0.0
    for _ in range(iters):
        u = A._adjoint(tinv_sqrt * w)
        est = float(np.linalg.norm(u))
        w_next = tinv_sqrt * A._apply(u)
        nrm = np.linalg.norm(w_next)
        if nrm == 0.0:
            return 0.0
        w = w_next / nrm
    u = A._adjoint(tinv_sqrt * w)
    return max(est, float(np.linalg.norm(u)))
