"""Encoder oracles: mixture fitting, round trips, layout arithmetic, conditioning."""

import math

import numpy as np
import pytest

from spectab.encoding import (
    SIGMA_FLOOR,
    CategoricalEncoder,
    ContinuousEncoder,
    EncodedLayout,
    MinmaxEncoder,
    MixedEncoder,
    TableEncoder,
    VgmParams,
    build_layout,
    condition_counts,
    fit_vgm,
    sample_condvec,
    sample_condvec_batch,
)
from spectab.errors import DataError, SchemaError
from spectab.schema import ColumnSpec, Table, TableSchema


def col(name, kind, **kw):
    return ColumnSpec(name=name, kind=kind, **kw)


class TestFitVgm:
    def test_single_gaussian_recovers_moments(self, rng):
        values = rng.normal(0.0, 1.0, 5000)
        p = fit_vgm(values, max_modes=10, rng=np.random.default_rng(1))
        k = int(np.argmax(p.weights))
        # sample-moment oracle
        assert abs(p.means[k] - values.mean()) <= 0.05
        assert abs(p.stds[k] - values.std()) <= 0.05
        assert abs(p.means[k]) <= 0.05 + 3 * 5000**-0.5
        assert abs(p.stds[k] - 1.0) <= 0.05 + 3 * 5000**-0.5
        assert p.weights[k] >= 0.9

    def test_two_clusters(self, rng):
        values = np.concatenate([rng.normal(-5, 0.1, 1000), rng.normal(5, 0.1, 1000)])
        p = fit_vgm(values, max_modes=10, rng=np.random.default_rng(2))
        assert p.n_modes == 2
        # cluster oracle: means of the sign-split halves
        lo, hi = values[values < 0].mean(), values[values > 0].mean()
        assert abs(p.means[0] - lo) <= 0.1
        assert abs(p.means[1] - hi) <= 0.1

    def test_constant_column(self):
        p = fit_vgm(np.full(50, 3.0), rng=np.random.default_rng(0))
        assert p.n_modes == 1
        assert p.means[0] == 3.0
        assert p.stds[0] == SIGMA_FLOOR

    def test_weights_sum_to_one(self, rng):
        p = fit_vgm(rng.normal(0, 2, 500) ** 2, rng=np.random.default_rng(3))
        assert abs(p.weights.sum() - 1.0) <= 1e-9
        assert (p.stds >= SIGMA_FLOOR).all()

    def test_rejects_bad_input(self):
        with pytest.raises(DataError):
            fit_vgm(np.array([1.0, np.nan]))
        with pytest.raises(DataError):
            fit_vgm(np.array([1.0]))

    def test_deterministic_given_seed(self, rng):
        values = rng.normal(0, 1, 400)
        a = fit_vgm(values, rng=np.random.default_rng(9))
        b = fit_vgm(values, rng=np.random.default_rng(9))
        assert np.array_equal(a.means, b.means) and np.array_equal(a.weights, b.weights)


class TestContinuousEncoder:
    def enc_with(self, weights, means, stds):
        e = ContinuousEncoder(col("x", "continuous"))
        e.vgm = VgmParams(np.asarray(weights, float), np.asarray(means, float), np.asarray(stds, float))
        return e

    def test_alpha_formula_single_mode(self):
        e = self.enc_with([1.0], [0.0], [1.0])
        block = e.encode(np.array([2.0]), np.random.default_rng(0))
        assert block[0, 0] == pytest.approx(0.5)  # (2-0)/(4*1)
        assert block[0, 1] == 1.0

    def test_alpha_zero_at_mode_mean(self):
        e = self.enc_with([1.0], [7.0], [2.0])
        block = e.encode(np.array([7.0]), np.random.default_rng(0))
        assert block[0, 0] == 0.0

    def test_alpha_one_at_four_sigma(self):
        e = self.enc_with([1.0], [1.0], [0.5])
        block = e.encode(np.array([3.0]), np.random.default_rng(0))
        assert block[0, 0] == pytest.approx(1.0)

    def test_clamped_value_decodes_to_four_sigma(self):
        e = self.enc_with([1.0], [0.0], [1.0])
        block = e.encode(np.array([10.0]), np.random.default_rng(0))
        assert block[0, 0] == 1.0
        assert e.decode(block)[0] == pytest.approx(4.0)

    def test_round_trip_within_four_sigma(self, rng):
        e = self.enc_with([0.5, 0.5], [-3.0, 3.0], [0.5, 0.5])
        x = rng.uniform(-4.9, 4.9, 200)
        block = e.encode(x, np.random.default_rng(1))
        back = e.decode(block)
        modes = block[:, 1:].argmax(axis=1)
        slack = np.maximum(0.0, np.abs(x - e.vgm.means[modes]) - 4.0 * e.vgm.stds[modes])
        assert (np.abs(back - x) <= slack + 1e-12).all()

    def test_mode_sampling_follows_responsibilities(self):
        e = self.enc_with([0.5, 0.5], [-5.0, 5.0], [1.0, 1.0])
        block = e.encode(np.full(500, -5.0), np.random.default_rng(2))
        assert block[:, 1].mean() > 0.999  # x sits on mode 0


class TestCategoricalEncoder:
    def make(self):
        return CategoricalEncoder(col("c", "categorical", categories=["a", "b", "c"]))

    def test_one_hot(self):
        assert self.make().encode(["b"]).tolist() == [[0.0, 1.0, 0.0]]

    def test_decode_argmax(self):
        assert self.make().decode(np.array([[0.2, 0.5, 0.3]])) == ["b"]

    def test_tie_breaks_low_index(self):
        assert self.make().decode(np.array([[0.5, 0.5, 0.0]])) == ["a"]

    def test_unseen_category_rejected_with_name(self):
        with pytest.raises(DataError, match="'c'"):
            self.make().encode(["zzz"])


class TestMinmaxEncoder:
    def make(self, lo=0.0, hi=10.0):
        e = MinmaxEncoder(col("m", "minmax"))
        e.lo, e.hi = lo, hi
        return e

    def test_endpoints_and_midpoint(self):
        e = self.make()
        out = e.encode(np.array([0.0, 10.0, 5.0]))[:, 0]
        assert out.tolist() == [-1.0, 1.0, 0.0]

    def test_round_trip(self, rng):
        e = self.make(-3.0, 7.0)
        x = rng.uniform(-3, 7, 100)
        assert np.allclose(e.decode(e.encode(x)), x, atol=1e-12)

    def test_out_of_range_clamped(self):
        e = self.make()
        assert e.encode(np.array([25.0]))[0, 0] == 1.0

    def test_constant_column(self):
        e = self.make(5.0, 5.0)
        assert e.encode(np.array([5.0]))[0, 0] == 0.0
        assert e.decode(np.array([[0.3]]))[0] == 5.0

    def test_integer_codes(self):
        e = MinmaxEncoder(col("m", "minmax", categories=["w", "x", "y", "z"]))
        e.fit(["w", "z"], None)
        enc = e.encode(["w", "x", "y", "z"])
        assert enc[:, 0].tolist() == [-1.0, pytest.approx(-1 / 3), pytest.approx(1 / 3), 1.0]
        assert e.decode(enc) == ["w", "x", "y", "z"]


class TestMixedEncoder:
    def make(self, rng):
        e = MixedEncoder(col("mx", "mixed", specials=[-1.0], missing=True))
        values = np.concatenate([[-1.0] * 50, [math.nan] * 30, rng.normal(5, 1, 400)])
        e.fit(values, np.random.default_rng(4))
        return e

    def test_missing_hits_slot_zero(self, rng):
        e = self.make(rng)
        block = e.encode(np.array([math.nan]), np.random.default_rng(0))
        assert block[0, 0] == 0.0  # alpha
        assert block[0, 1] == 1.0  # missing slot
        assert math.isnan(e.decode(block)[0])

    def test_special_value_slot(self, rng):
        e = self.make(rng)
        block = e.encode(np.array([-1.0]), np.random.default_rng(0))
        assert block[0, 2] == 1.0
        assert e.decode(block)[0] == -1.0

    def test_ordinary_value_reduces_to_continuous(self, rng):
        e = self.make(rng)
        block = e.encode(np.array([5.0]), np.random.default_rng(1))
        assert block[0, 1: 1 + e.n_special].sum() == 0.0
        assert block[0, 1 + e.n_special :].sum() == 1.0
        assert abs(e.decode(block)[0] - 5.0) <= 1e-9

    def test_width_bookkeeping(self, rng):
        # specials {-1} + modes: extended one-hot width = 1 + m
        e = MixedEncoder(col("mx", "mixed", specials=[-1.0]))
        values = np.concatenate([[-1.0] * 20, rng.normal(5, 1, 200)])
        e.fit(values, np.random.default_rng(5))
        m = e.vgm.n_modes
        assert e.width == 1 + (1 + m)  # alpha + extended one-hot
        assert e.cv_width == 1 + m


def schema_two_col():
    return TableSchema(
        [
            col("x", "continuous"),
            col("c", "categorical", categories=["a", "b", "c", "d"]),
        ]
    )


class TestLayout:
    def test_widths_example(self):
        schema = schema_two_col()
        enc = TableEncoder(schema)
        enc.encoders[0].vgm = VgmParams(np.full(10, 0.1), np.arange(10.0), np.ones(10))
        layout = build_layout(schema, enc.encoders)
        assert layout.d_enc == (1 + 10) + 4 == 15
        assert layout.d_cv == 10 + 4
        assert layout.columns[0].offset == 0
        assert layout.columns[1].offset == 11

    def test_minmax_only_schema_disables_conditioning(self):
        schema = TableSchema([col("m", "minmax")])
        enc = TableEncoder(schema)
        enc.encoders[0].lo, enc.encoders[0].hi = 0.0, 1.0
        layout = build_layout(schema, enc.encoders)
        assert layout.d_cv == 0
        with pytest.raises(SchemaError):
            sample_condvec(layout, {}, np.random.default_rng(0))

    def test_permutation_equivariance(self, rng):
        table, enc = _fitted_mixed_table(rng)
        layout = enc.layout
        order = [3, 0, 2, 1]
        schema_p = table.schema.permuted(order)
        enc_p = TableEncoder(schema_p)
        for new_i, old_i in enumerate(order):
            enc_p.encoders[new_i] = enc.encoders[old_i]
        layout_p = build_layout(schema_p, enc_p.encoders)
        assert layout_p.d_enc == layout.d_enc
        assert layout_p.d_cv == layout.d_cv
        # spans permute identically: widths follow the column, offsets re-pack
        assert [c.width for c in layout_p.columns] == [layout.columns[i].width for i in order]
        assert [c.cv_width for c in layout_p.columns] == [layout.columns[i].cv_width for i in order]


class TestCondVec:
    def _layout_single_cat(self, n_cats):
        schema = TableSchema([col("c", "categorical", categories=[str(i) for i in range(n_cats)])])
        enc = TableEncoder(schema)
        return build_layout(schema, enc.encoders)

    def test_log_smoothing_preserves_minorities(self):
        layout = self._layout_single_cat(2)
        counts = {0: np.array([999.0, 1.0])}
        vec, _, slots = sample_condvec_batch(layout, counts, np.random.default_rng(0), 10_000)
        assert (slots == 1).mean() >= 0.05
        assert np.array_equal(vec.sum(axis=1), np.ones(10_000))

    def test_single_category_always_hot(self):
        layout = self._layout_single_cat(1)
        cv = sample_condvec(layout, {0: np.array([5.0])}, np.random.default_rng(0))
        assert cv.vec.tolist() == [1.0]
        assert (cv.column, cv.slot) == (0, 0)

    def test_two_columns_uniform(self):
        schema = TableSchema(
            [
                col("c1", "categorical", categories=["a", "b"]),
                col("c2", "categorical", categories=["x", "y"]),
            ]
        )
        layout = build_layout(schema, TableEncoder(schema).encoders)
        counts = {0: np.array([10.0, 20.0]), 1: np.array([5.0, 5.0])}
        _, cols, _ = sample_condvec_batch(layout, counts, np.random.default_rng(1), 10_000)
        share = (cols == 0).mean()
        assert abs(share - 0.5) <= 0.02

    def test_exactly_one_hot_with_consistent_metadata(self):
        schema = schema_two_col()
        enc = TableEncoder(schema)
        enc.encoders[0].vgm = VgmParams(np.array([0.6, 0.4]), np.array([0.0, 5.0]), np.ones(2))
        layout = build_layout(schema, enc.encoders)
        counts = {0: np.array([3.0, 7.0]), 1: np.array([1.0, 2.0, 3.0, 4.0])}
        rng = np.random.default_rng(2)
        for _ in range(100):
            cv = sample_condvec(layout, counts, rng)
            assert cv.vec.sum() == 1.0
            colspan = layout.columns[cv.column]
            assert cv.vec[colspan.cv_offset + cv.slot] == 1.0


def _fitted_mixed_table(rng, n=1000):
    schema = TableSchema(
        [
            col("amount", "continuous"),
            col("status", "categorical", categories=["open", "closed", "frozen"]),
            col("balance", "mixed", specials=[-1.0], missing=True),
            col("score", "minmax"),
        ]
    )
    amount = np.concatenate([rng.normal(-2, 0.5, n // 2), rng.normal(3, 1.0, n - n // 2)])
    status = [["open", "closed", "frozen"][i % 3] for i in range(n)]
    balance = rng.normal(100, 10, n)
    balance[rng.random(n) < 0.1] = -1.0
    balance[rng.random(n) < 0.05] = math.nan
    score = rng.uniform(0, 1, n)
    table = Table(
        schema,
        {"amount": amount, "status": status, "balance": balance, "score": score},
    )
    enc = TableEncoder(schema).fit(table, np.random.default_rng(77))
    return table, enc


class TestRowPipeline:
    def test_segment_sums(self, rng):
        table, enc = _fitted_mixed_table(rng, 200)
        encoded = enc.encode_table(table, np.random.default_rng(0))
        for off, width in enc.layout.onehot_segments():
            assert np.allclose(encoded[:, off : off + width].sum(axis=1), 1.0)

    def test_categorical_only_row_roundtrip(self):
        schema = TableSchema([col("c", "categorical", categories=["u", "v"])])
        table = Table(schema, {"c": ["v", "u", "v"]})
        enc = TableEncoder(schema).fit(table, np.random.default_rng(0))
        out = enc.decode_table(enc.encode_table(table, np.random.default_rng(0)))
        assert out.columns["c"] == ["v", "u", "v"]

    def test_mixed_missing_roundtrip(self, rng):
        table, enc = _fitted_mixed_table(rng, 300)
        encoded = enc.encode_table(table, np.random.default_rng(1))
        out = enc.decode_table(encoded)
        src = table.columns["balance"]
        back = out.columns["balance"]
        nan_rows = np.isnan(src)
        assert np.array_equal(nan_rows, np.isnan(back))
        assert np.array_equal(src[src == -1.0], back[src == -1.0])

    def test_thousand_row_replay(self, rng):
        # per-row replay oracle: categoricals/minmax/specials exact, continuous
        # within the 4-sigma clamp slack
        table, enc = _fitted_mixed_table(rng, 1000)
        encoded = enc.encode_table(table, np.random.default_rng(2))
        out = enc.decode_table(encoded)
        assert out.columns["status"] == table.columns["status"]
        assert np.allclose(out.columns["score"], table.columns["score"], atol=1e-9)
        for name in ("amount", "balance"):
            lay = enc.layout.column(name)
            e = enc.encoders[enc.schema.index_of(name)]
            src = np.asarray(table.columns[name])
            back = np.asarray(out.columns[name])
            block = encoded[:, lay.offset : lay.offset + lay.width]
            n_spec = e.n_special if name == "balance" else 0
            for i in range(len(src)):
                if name == "balance" and (math.isnan(src[i]) or src[i] == -1.0):
                    continue
                onehot = block[i, 1:]
                k = onehot.argmax() - n_spec
                mu, sd = e.vgm.means[k], e.vgm.stds[k]
                slack = max(0.0, abs(src[i] - mu) - 4.0 * sd)
                assert abs(back[i] - src[i]) <= slack + 1e-9

    def test_encode_row_decode_row(self, rng):
        table, enc = _fitted_mixed_table(rng, 50)
        vec = enc.encode_row(table.row(7), np.random.default_rng(3))
        row = enc.decode_row(vec)
        assert row[1] == table.row(7)[1]

    def test_state_roundtrip(self, rng):
        table, enc = _fitted_mixed_table(rng, 150)
        state = enc.to_state()
        enc2 = TableEncoder.from_state(table.schema, state)
        a = enc.encode_table(table, np.random.default_rng(5))
        b = enc2.encode_table(table, np.random.default_rng(5))
        assert np.array_equal(a, b)
        assert enc2.layout.d_enc == enc.layout.d_enc

    def test_condition_counts_match_data(self, rng):
        table, enc = _fitted_mixed_table(rng, 120)
        encoded = enc.encode_table(table, np.random.default_rng(6))
        counts = condition_counts(encoded, enc.layout)
        status_idx = table.schema.index_of("status")
        assert counts[status_idx].sum() == 120
        assert counts[status_idx][0] == sum(1 for s in table.columns["status"] if s == "open")
