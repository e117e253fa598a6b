"""Schema-driven encoding between raw table rows and the GAN's real vector.

Continuous columns use mode-specific normalisation: a per-column Gaussian
mixture is fitted, each value samples a mode from the posterior
responsibilities and is stored as a scalar offset
``alpha = clamp((x - mu_k) / (4 sigma_k), -1, 1)`` next to the mode one-hot.
Categorical columns are one-hot; minmax columns are a single scalar in
[-1, 1]; mixed columns prepend special-value slots (missing first) to the
mode one-hot.

The conditional vector concatenates, per eligible column (categorical,
continuous, mixed -- minmax is ineligible), one slot per category or mode;
sampling picks a column uniformly and a slot with probability proportional
to log(1 + count), which over-represents minority categories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, SchemaError
from .schema import ColumnSpec, Table, TableSchema

DEFAULT_MAX_MODES = 10
WEIGHT_FLOOR = 0.005
SIGMA_FLOOR = 1e-6
_LOG_2PI = math.log(2.0 * math.pi)


# ---------------------------------------------------------------------------
# Gaussian mixture fitting
# ---------------------------------------------------------------------------


@dataclass
class VgmParams:
    """Per-column mixture: weights sum to 1, stds are floored."""

    weights: np.ndarray
    means: np.ndarray
    stds: np.ndarray

    @property
    def n_modes(self) -> int:
        return len(self.weights)

    def to_dict(self) -> dict:
        return {
            "weights": [float(w) for w in self.weights],
            "means": [float(m) for m in self.means],
            "stds": [float(s) for s in self.stds],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "VgmParams":
        return cls(
            weights=np.asarray(d["weights"], dtype=np.float64),
            means=np.asarray(d["means"], dtype=np.float64),
            stds=np.asarray(d["stds"], dtype=np.float64),
        )


def _log_density(values: np.ndarray, p: VgmParams) -> np.ndarray:
    """(n, m) log of weight_k * N(x; mu_k, sigma_k)."""
    z = (values[:, None] - p.means[None, :]) / p.stds[None, :]
    return np.log(p.weights[None, :]) - np.log(p.stds[None, :]) - 0.5 * (z * z + _LOG_2PI)


def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    hi = a.max(axis=axis, keepdims=True)
    return (hi + np.log(np.exp(a - hi).sum(axis=axis, keepdims=True))).squeeze(axis)


def _kmeanspp_centers(values: np.ndarray, m: int, rng: np.random.Generator) -> np.ndarray:
    centers = [values[rng.integers(len(values))]]
    for _ in range(1, m):
        d2 = np.min((values[:, None] - np.asarray(centers)[None, :]) ** 2, axis=1)
        total = d2.sum()
        if total <= 0:
            centers.append(values[rng.integers(len(values))])
            continue
        centers.append(values[np.searchsorted(np.cumsum(d2 / total), rng.random())])
    return np.asarray(centers, dtype=np.float64)


def _em_run(values: np.ndarray, m: int, rng: np.random.Generator, max_iter: int, tol: float) -> tuple[VgmParams, float]:
    n = len(values)
    spread = max(float(values.std()), SIGMA_FLOOR)
    p = VgmParams(
        weights=np.full(m, 1.0 / m),
        means=_kmeanspp_centers(values, m, rng),
        stds=np.full(m, spread),
    )
    prev_ll = -np.inf
    for _ in range(max_iter):
        logd = _log_density(values, p)
        norm = _logsumexp(logd, axis=1)
        ll = float(norm.sum())
        resp = np.exp(logd - norm[:, None])
        nk = resp.sum(axis=0)
        safe = np.maximum(nk, 1e-12)
        means = (resp * values[:, None]).sum(axis=0) / safe
        var = (resp * (values[:, None] - means[None, :]) ** 2).sum(axis=0) / safe
        p = VgmParams(
            weights=np.maximum(nk / n, 1e-12),
            means=means,
            stds=np.maximum(np.sqrt(var), SIGMA_FLOOR),
        )
        p.weights /= p.weights.sum()
        if abs(ll - prev_ll) < tol * max(1.0, abs(ll)):
            prev_ll = ll
            break
        prev_ll = ll
    return p, prev_ll


def fit_vgm(
    values,
    max_modes: int = DEFAULT_MAX_MODES,
    rng: np.random.Generator | None = None,
    weight_floor: float = WEIGHT_FLOOR,
    sigma_floor: float = SIGMA_FLOOR,
    restarts: int = 3,
    max_iter: int = 200,
    tol: float = 1e-8,
) -> VgmParams:
    """EM fit with k-means++ starts; the mode count is chosen by BIC.

    For each candidate count the best of ``restarts`` runs (by likelihood) is
    kept; candidates compete on BIC, which collapses to a single mode for
    unimodal data.  Modes under ``weight_floor`` are pruned afterwards.
    Deterministic for a given rng state.
    """
    rng = rng or np.random.default_rng(0)
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1:
        raise ValueError("fit_vgm expects a 1-D value array")
    if not np.all(np.isfinite(values)):
        raise DataError("fit_vgm: non-finite input value")
    if len(values) < 2:
        raise DataError("fit_vgm: need at least 2 values")
    distinct = np.unique(values)
    if len(distinct) == 1:
        return VgmParams(np.array([1.0]), np.array([values[0]]), np.array([sigma_floor]))
    n = len(values)
    best: tuple[float, VgmParams] | None = None
    for m in range(1, min(max_modes, len(distinct)) + 1):
        run_best: tuple[float, VgmParams] | None = None
        for _ in range(restarts):
            p, ll = _em_run(values, m, rng, max_iter, tol)
            if run_best is None or ll > run_best[0]:
                run_best = (ll, p)
        ll, p = run_best
        bic = -2.0 * ll + (3 * m - 1) * math.log(n)
        if best is None or bic < best[0]:
            best = (bic, p)
    p = best[1]
    keep = p.weights >= weight_floor
    if not keep.any():
        keep[np.argmax(p.weights)] = True
    order = np.argsort(p.means[keep])
    weights = p.weights[keep][order]
    return VgmParams(
        weights=weights / weights.sum(),
        means=p.means[keep][order],
        stds=np.maximum(p.stds[keep][order], sigma_floor),
    )


# ---------------------------------------------------------------------------
# per-column encoders
# ---------------------------------------------------------------------------


def _sample_modes(values: np.ndarray, p: VgmParams, rng: np.random.Generator) -> np.ndarray:
    logd = _log_density(values, p)
    probs = np.exp(logd - _logsumexp(logd, axis=1)[:, None])
    cdf = np.cumsum(probs, axis=1)
    cdf[:, -1] = 1.0
    u = rng.random(len(values))
    return (cdf > u[:, None]).argmax(axis=1)


def _alpha_of(values: np.ndarray, modes: np.ndarray, p: VgmParams) -> np.ndarray:
    mu = p.means[modes]
    sd = p.stds[modes]
    return np.clip((values - mu) / (4.0 * sd), -1.0, 1.0)


class ContinuousEncoder:
    """Mode-specific normalisation: scalar alpha + mode one-hot."""

    kind = "continuous"

    def __init__(self, col: ColumnSpec):
        self.col = col
        self.vgm: VgmParams | None = None

    def fit(self, values: np.ndarray, rng: np.random.Generator) -> None:
        self.vgm = fit_vgm(values, max_modes=self.col.max_modes or DEFAULT_MAX_MODES, rng=rng)

    @property
    def width(self) -> int:
        return 1 + self.vgm.n_modes

    @property
    def cv_width(self) -> int:
        return self.vgm.n_modes

    def encode(self, values: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        modes = _sample_modes(values, self.vgm, rng)
        out = np.zeros((len(values), self.width))
        out[:, 0] = _alpha_of(values, modes, self.vgm)
        out[np.arange(len(values)), 1 + modes] = 1.0
        return out

    def decode(self, block: np.ndarray) -> np.ndarray:
        modes = block[:, 1:].argmax(axis=1)
        return self.vgm.means[modes] + 4.0 * self.vgm.stds[modes] * block[:, 0]

    def to_dict(self) -> dict:
        return {"kind": self.kind, "vgm": self.vgm.to_dict()}

    def load_state(self, d: dict) -> None:
        self.vgm = VgmParams.from_dict(d["vgm"])


class CategoricalEncoder:
    """One-hot over the schema vocabulary; decode is argmax (lowest index wins ties)."""

    kind = "categorical"

    def __init__(self, col: ColumnSpec):
        self.col = col
        self.categories = list(col.categories)
        self._index = {c: i for i, c in enumerate(self.categories)}

    def fit(self, values, rng) -> None:
        for v in values:
            if v not in self._index:
                raise DataError(f"column {self.col.name!r}: unseen category {v!r}")

    @property
    def width(self) -> int:
        return len(self.categories)

    @property
    def cv_width(self) -> int:
        return len(self.categories)

    def encode(self, values, rng=None) -> np.ndarray:
        out = np.zeros((len(values), self.width))
        for i, v in enumerate(values):
            j = self._index.get(v)
            if j is None:
                raise DataError(f"column {self.col.name!r}: unseen category {v!r}")
            out[i, j] = 1.0
        return out

    def decode(self, block: np.ndarray) -> list[str]:
        return [self.categories[j] for j in block.argmax(axis=1)]

    def to_dict(self) -> dict:
        return {"kind": self.kind, "categories": self.categories}

    def load_state(self, d: dict) -> None:
        self.categories = list(d["categories"])
        self._index = {c: i for i, c in enumerate(self.categories)}


class MinmaxEncoder:
    """Affine map of [lo, hi] onto [-1, 1]; supports integer-coded vocabularies."""

    kind = "minmax"

    def __init__(self, col: ColumnSpec):
        self.col = col
        self.codes = list(col.categories) if col.categories is not None else None
        self._index = {c: i for i, c in enumerate(self.codes)} if self.codes else None
        self.lo: float | None = None
        self.hi: float | None = None

    def _numeric(self, values) -> np.ndarray:
        if self.codes is None:
            return np.asarray(values, dtype=np.float64)
        out = np.empty(len(values), dtype=np.float64)
        for i, v in enumerate(values):
            j = self._index.get(v)
            if j is None:
                raise DataError(f"column {self.col.name!r}: unseen category {v!r}")
            out[i] = j
        return out

    def fit(self, values, rng) -> None:
        if self.col.bounds is not None:
            self.lo, self.hi = float(self.col.bounds[0]), float(self.col.bounds[1])
        elif self.codes is not None:
            self.lo, self.hi = 0.0, float(len(self.codes) - 1)
        else:
            numeric = self._numeric(values)
            self.lo, self.hi = float(numeric.min()), float(numeric.max())

    @property
    def width(self) -> int:
        return 1

    @property
    def cv_width(self) -> int:
        return 0

    def encode(self, values, rng=None) -> np.ndarray:
        numeric = self._numeric(values)
        if self.hi == self.lo:
            scaled = np.zeros(len(numeric))
        else:
            scaled = np.clip(2.0 * (numeric - self.lo) / (self.hi - self.lo) - 1.0, -1.0, 1.0)
        return scaled[:, None]

    def decode(self, block: np.ndarray):
        scaled = block[:, 0]
        if self.hi == self.lo:
            numeric = np.full(len(scaled), self.lo)
        else:
            numeric = (np.clip(scaled, -1.0, 1.0) + 1.0) / 2.0 * (self.hi - self.lo) + self.lo
        if self.codes is None:
            return numeric
        idx = np.clip(np.rint(numeric).astype(int), 0, len(self.codes) - 1)
        return [self.codes[j] for j in idx]

    def to_dict(self) -> dict:
        return {"kind": self.kind, "lo": self.lo, "hi": self.hi, "codes": self.codes}

    def load_state(self, d: dict) -> None:
        self.lo, self.hi = d["lo"], d["hi"]
        self.codes = d["codes"]
        self._index = {c: i for i, c in enumerate(self.codes)} if self.codes else None


class MixedEncoder:
    """Special-value slots (missing first) followed by mode-normalised values."""

    kind = "mixed"

    def __init__(self, col: ColumnSpec):
        self.col = col
        self.missing = col.missing
        self.specials = [float(s) for s in (col.specials or [])]
        self.vgm: VgmParams | None = None

    @property
    def n_special(self) -> int:
        return len(self.specials) + (1 if self.missing else 0)

    def _special_slot(self, values: np.ndarray) -> np.ndarray:
        """Per value: slot index in [0, n_special) or -1 for ordinary values."""
        slot = np.full(len(values), -1, dtype=int)
        offset = 0
        if self.missing:
            slot[np.isnan(values)] = 0
            offset = 1
        for j, s in enumerate(self.specials):
            slot[values == s] = offset + j
        return slot

    def fit(self, values: np.ndarray, rng: np.random.Generator) -> None:
        if np.isnan(values).any() and not self.missing:
            raise DataError(f"column {self.col.name!r}: missing values not declared in schema")
        ordinary = values[self._special_slot(values) < 0]
        if len(np.unique(ordinary)) >= 2:
            self.vgm = fit_vgm(ordinary, max_modes=self.col.max_modes or DEFAULT_MAX_MODES, rng=rng)
        elif len(ordinary) >= 1:
            self.vgm = VgmParams(np.array([1.0]), np.array([ordinary[0]]), np.array([SIGMA_FLOOR]))
        else:
            self.vgm = VgmParams(np.empty(0), np.empty(0), np.empty(0))

    @property
    def width(self) -> int:
        return 1 + self.n_special + self.vgm.n_modes

    @property
    def cv_width(self) -> int:
        return self.n_special + self.vgm.n_modes

    def encode(self, values: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        out = np.zeros((len(values), self.width))
        slot = self._special_slot(values)
        special = slot >= 0
        out[special, 1 + slot[special]] = 1.0
        ordinary = ~special
        if ordinary.any():
            if self.vgm.n_modes == 0:
                raise DataError(
                    f"column {self.col.name!r}: ordinary value present but no modes were fitted"
                )
            vals = values[ordinary]
            modes = _sample_modes(vals, self.vgm, rng)
            out[ordinary, 0] = _alpha_of(vals, modes, self.vgm)
            rows = np.nonzero(ordinary)[0]
            out[rows, 1 + self.n_special + modes] = 1.0
        return out

    def decode(self, block: np.ndarray) -> np.ndarray:
        slots = block[:, 1:].argmax(axis=1)
        out = np.empty(len(block))
        for i, s in enumerate(slots):
            if s < self.n_special:
                if self.missing and s == 0:
                    out[i] = math.nan
                else:
                    out[i] = self.specials[s - (1 if self.missing else 0)]
            else:
                k = s - self.n_special
                out[i] = self.vgm.means[k] + 4.0 * self.vgm.stds[k] * block[i, 0]
        return out

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "specials": self.specials,
            "missing": self.missing,
            "vgm": self.vgm.to_dict(),
        }

    def load_state(self, d: dict) -> None:
        self.specials = [float(s) for s in d["specials"]]
        self.missing = bool(d["missing"])
        self.vgm = VgmParams.from_dict(d["vgm"])


_ENCODERS = {
    "continuous": ContinuousEncoder,
    "categorical": CategoricalEncoder,
    "minmax": MinmaxEncoder,
    "mixed": MixedEncoder,
}


# ---------------------------------------------------------------------------
# layout
# ---------------------------------------------------------------------------


@dataclass
class ColumnLayout:
    name: str
    kind: str
    offset: int
    width: int
    scalar_offset: int | None  # absolute index of the alpha / minmax scalar
    onehot_offset: int | None  # absolute start of the one-hot span
    onehot_width: int
    cv_offset: int | None  # start within the conditional vector
    cv_width: int


@dataclass
class EncodedLayout:
    """Spans of every column in the encoded vector plus conditional-vector map."""

    columns: list[ColumnLayout]
    d_enc: int
    d_cv: int

    def column(self, name: str) -> ColumnLayout:
        for c in self.columns:
            if c.name == name:
                return c
        raise KeyError(name)

    def onehot_segments(self) -> list[tuple[int, int]]:
        return [(c.onehot_offset, c.onehot_width) for c in self.columns if c.onehot_width]

    def scalar_positions(self) -> list[int]:
        return [c.scalar_offset for c in self.columns if c.scalar_offset is not None]

    def eligible_columns(self) -> list[int]:
        return [i for i, c in enumerate(self.columns) if c.cv_width > 0]


def build_layout(schema: TableSchema, encoders: list) -> EncodedLayout:
    cols = []
    offset = 0
    cv_offset = 0
    for spec, enc in zip(schema.columns, encoders):
        width = enc.width
        cv_width = enc.cv_width
        if spec.kind == "minmax":
            scalar, onehot_off, onehot_w = offset, None, 0
        elif spec.kind == "categorical":
            scalar, onehot_off, onehot_w = None, offset, width
        else:  # continuous / mixed: alpha first, then the one-hot block
            scalar, onehot_off, onehot_w = offset, offset + 1, width - 1
        cols.append(
            ColumnLayout(
                name=spec.name,
                kind=spec.kind,
                offset=offset,
                width=width,
                scalar_offset=scalar,
                onehot_offset=onehot_off,
                onehot_width=onehot_w,
                cv_offset=cv_offset if cv_width else None,
                cv_width=cv_width,
            )
        )
        offset += width
        cv_offset += cv_width
    return EncodedLayout(cols, d_enc=offset, d_cv=cv_offset)


# ---------------------------------------------------------------------------
# conditional vectors
# ---------------------------------------------------------------------------


@dataclass
class CondVector:
    vec: np.ndarray
    column: int  # schema column index
    slot: int  # index within the column's conditional span


def condition_counts(encoded: np.ndarray, layout: EncodedLayout) -> dict[int, np.ndarray]:
    """Occupancy counts of each eligible column's conditional slots.

    For categorical columns these are category counts; for continuous/mixed
    columns, counts of the sampled modes (and special slots).
    """
    counts: dict[int, np.ndarray] = {}
    for i in layout.eligible_columns():
        col = layout.columns[i]
        block = encoded[:, col.onehot_offset : col.onehot_offset + col.onehot_width]
        counts[i] = block.sum(axis=0)
    return counts


def sample_condvec(
    layout: EncodedLayout,
    counts: dict[int, np.ndarray],
    rng: np.random.Generator,
) -> CondVector:
    vec, cols, slots = sample_condvec_batch(layout, counts, rng, 1)
    return CondVector(vec[0], int(cols[0]), int(slots[0]))


def sample_condvec_batch(
    layout: EncodedLayout,
    counts: dict[int, np.ndarray],
    rng: np.random.Generator,
    n: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(n, d_cv) one-hot matrix plus chosen (column, slot) per row.

    Columns are drawn uniformly among eligible ones; slots with probability
    proportional to log(1 + count).
    """
    eligible = layout.eligible_columns()
    if not eligible:
        raise SchemaError("conditional sampling is disabled: no eligible columns (d_cv == 0)")
    probs = {}
    for i in eligible:
        w = np.log1p(np.asarray(counts[i], dtype=np.float64))
        total = w.sum()
        if total <= 0:
            raise DataError(f"column {layout.columns[i].name!r}: empty conditional frequency table")
        probs[i] = w / total
    vec = np.zeros((n, layout.d_cv))
    col_pick = rng.integers(0, len(eligible), size=n)
    cols = np.asarray([eligible[c] for c in col_pick])
    slots = np.empty(n, dtype=int)
    u = rng.random(n)
    for j in range(n):
        cdf = np.cumsum(probs[cols[j]])
        cdf[-1] = 1.0
        slots[j] = int((cdf > u[j]).argmax())
        vec[j, layout.columns[cols[j]].cv_offset + slots[j]] = 1.0
    return vec, cols, slots


# ---------------------------------------------------------------------------
# whole-table encoder
# ---------------------------------------------------------------------------


class TableEncoder:
    """Fitted bundle of per-column encoders with the derived layout."""

    def __init__(self, schema: TableSchema):
        self.schema = schema
        self.encoders = [_ENCODERS[c.kind](c) for c in schema.columns]
        self.layout: EncodedLayout | None = None

    def fit(self, table: Table, rng: np.random.Generator) -> "TableEncoder":
        if table.schema.names != self.schema.names:
            raise SchemaError("table schema does not match encoder schema")
        for spec, enc in zip(self.schema.columns, self.encoders):
            enc.fit(table.columns[spec.name], rng)
        self.layout = build_layout(self.schema, self.encoders)
        return self

    @property
    def d_enc(self) -> int:
        return self.layout.d_enc

    @property
    def d_cv(self) -> int:
        return self.layout.d_cv

    def encode_table(self, table: Table, rng: np.random.Generator) -> np.ndarray:
        if table.schema.names != self.schema.names:
            raise SchemaError("table schema does not match encoder schema")
        blocks = []
        for spec, enc in zip(self.schema.columns, self.encoders):
            try:
                blocks.append(enc.encode(table.columns[spec.name], rng))
            except DataError as exc:
                raise DataError(f"encoding failed: {exc}") from exc
        return np.concatenate(blocks, axis=1)

    def encode_row(self, row: list, rng: np.random.Generator) -> np.ndarray:
        cols = {}
        for spec, value in zip(self.schema.columns, row):
            cols[spec.name] = np.asarray([value], dtype=np.float64) if spec.numeric else [value]
        return self.encode_table(Table(self.schema, cols), rng)[0]

    def decode_table(self, encoded: np.ndarray) -> Table:
        if encoded.ndim != 2 or encoded.shape[1] != self.d_enc:
            raise DataError(f"encoded matrix width {encoded.shape} != d_enc {self.d_enc}")
        cols = {}
        for spec, enc, lay in zip(self.schema.columns, self.encoders, self.layout.columns):
            block = encoded[:, lay.offset : lay.offset + lay.width]
            cols[spec.name] = enc.decode(block)
        return Table(self.schema, cols)

    def decode_row(self, vec: np.ndarray) -> list:
        table = self.decode_table(np.asarray(vec)[None, :])
        return table.row(0)

    def to_state(self) -> dict:
        return {"columns": [enc.to_dict() for enc in self.encoders]}

    @classmethod
    def from_state(cls, schema: TableSchema, state: dict) -> "TableEncoder":
        self = cls(schema)
        for enc, d in zip(self.encoders, state["columns"]):
            if enc.kind != d["kind"]:
                raise SchemaError("encoder state does not match schema kinds")
            enc.load_state(d)
        self.layout = build_layout(schema, self.encoders)
        return self
