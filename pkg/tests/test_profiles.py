from __future__ import annotations

import math
import random
from datetime import date, timedelta
from decimal import Decimal

import pytest
from hypothesis import given, strategies as st

from ledgercast.core import Invoice, Segment
from ledgercast.errors import MissingDataError
from ledgercast.profiles import (ProfileBook, average_payment, build_profile, payment_delay, payment_std,
                                 recent_speed_to_pay)

DUE = date(2024, 1, 10)


def closed(delay, paid=None, amount="50", iid="i", cust="c1", seg="Commercial"):
    paid = paid or DUE + timedelta(days=delay)
    due = paid - timedelta(days=delay)
    return Invoice(iid, cust, seg, due - timedelta(days=30), due, Decimal(amount), paid, 30)


class TestDelay:
    @pytest.mark.parametrize("paid,expected", [(date(2024, 1, 15), 5), (date(2024, 1, 10), 0),
                                               (date(2024, 1, 8), -2)])
    def test_examples(self, paid, expected):
        i = Invoice("a", "c", "CSB", date(2023, 12, 1), DUE, Decimal(1), paid, 40)
        assert payment_delay(i) == expected

    def test_open(self):
        with pytest.raises(MissingDataError):
            payment_delay(Invoice("a", "c", "CSB", date(2023, 12, 1), DUE, Decimal(1)))


class TestMoments:
    def test_average(self):
        assert average_payment([10, 20, 30]) == 20
        assert average_payment([7]) == 7
        assert average_payment([1.5, 2.5]) == 2.0

    def test_std(self):
        assert payment_std([100, 100]) == 0
        assert payment_std([0, 10]) == 5
        assert payment_std([2, 4, 4, 4, 5, 5, 7, 9]) == 2

    def test_empty(self):
        with pytest.raises(MissingDataError):
            average_payment([])
        with pytest.raises(MissingDataError):
            payment_std([])

    @given(st.floats(0.01, 1e6), st.integers(1, 30))
    def test_constant_zero_std(self, c, n):
        assert payment_std([c] * n) == pytest.approx(0.0, abs=1e-9 * c)

    @given(st.lists(st.floats(0.01, 1e6), min_size=1, max_size=30), st.randoms())
    def test_permutation_invariant(self, xs, rnd):
        ys = list(xs)
        rnd.shuffle(ys)
        assert average_payment(ys) == pytest.approx(average_payment(xs), rel=1e-12)
        assert payment_std(ys) == pytest.approx(payment_std(xs), rel=1e-9, abs=1e-9)


class TestRecentSpeed:
    def test_single(self):
        assert recent_speed_to_pay([closed(4)]) == 4

    def test_old_payment_excluded(self):
        latest = date(2024, 8, 1)
        invs = [closed(10, paid=latest - timedelta(days=200), iid="a"), closed(2, paid=latest, iid="b")]
        assert recent_speed_to_pay(invs) == 2

    def test_mean_in_window(self):
        latest = date(2024, 8, 1)
        invs = [closed(3, paid=latest - timedelta(days=20), iid="a"), closed(5, paid=latest, iid="b")]
        assert recent_speed_to_pay(invs) == 4

    def test_window_boundary(self):
        latest = date(2024, 8, 1)
        invs = [closed(100, paid=latest - timedelta(days=90), iid="a"),
                closed(7, paid=latest - timedelta(days=89), iid="b"), closed(1, paid=latest, iid="c")]
        assert recent_speed_to_pay(invs) == 4

    def test_window_anchored_on_latest_payment_not_as_of(self):
        latest = date(2024, 1, 20)
        invs = [closed(6, paid=latest, iid="a")]
        assert recent_speed_to_pay(invs, as_of=date(2025, 1, 1)) == 6

    def test_none_closed(self):
        with pytest.raises(MissingDataError):
            recent_speed_to_pay([Invoice("a", "c", "CSB", date(2024, 1, 1), DUE, Decimal(1))])

    @given(st.lists(st.tuples(st.integers(0, 400), st.integers(-20, 60)), min_size=1, max_size=25))
    def test_never_uses_old_payments(self, rows):
        base = date(2023, 1, 1)
        invs = [closed(d, paid=base + timedelta(days=off), iid=str(k)) for k, (off, d) in enumerate(rows)]
        latest = max(off for off, _ in rows)
        inside = [d for off, d in rows if latest - off < 90]
        assert recent_speed_to_pay(invs) == pytest.approx(sum(inside) / len(inside))


class TestBuildProfile:
    def test_single_invoice(self):
        i = closed(3, amount="50")
        p = build_profile([i], i.payment_date)
        assert (p.avg_payment, p.payment_std, p.mean_delay_days, p.n_invoices) == (50, 0, 3, 1)
        assert not p.cold_start

    def test_cold_start(self):
        i = Invoice("a", "c", "CSB", date(2024, 1, 1), DUE, Decimal(1))
        p = build_profile([i], date(2024, 3, 1))
        assert p.cold_start and p.n_invoices == 0 and math.isnan(p.mean_delay_days)

    def test_equal_recency_is_plain_mean(self):
        paid = date(2024, 3, 1)
        p = build_profile([closed(2, paid=paid, iid="a"), closed(8, paid=paid, iid="b")], paid)
        assert p.recency_weighted_delay_days == pytest.approx(5.0)

    def test_recency_weight_half_life(self):
        paid = date(2024, 6, 1)
        invs = [closed(0, paid=paid - timedelta(days=90), iid="a"), closed(9, paid=paid, iid="b")]
        # weights 0.5 and 1 -> (0 * 0.5 + 9) / 1.5
        assert build_profile(invs, paid).recency_weighted_delay_days == pytest.approx(6.0)

    def test_ignores_future_payments(self):
        paid = date(2024, 3, 1)
        past = closed(2, paid=paid, iid="a", amount="10")
        future = closed(40, paid=paid + timedelta(days=5), iid="b", amount="1000")
        p = build_profile([past, future], paid)
        assert (p.mean_delay_days, p.avg_payment, p.n_invoices) == (2, 10, 1)
        assert p == build_profile([past], paid)

    def test_empty(self):
        with pytest.raises(MissingDataError):
            build_profile([], date(2024, 1, 1))


class TestProfileBook:
    def test_matches_build_profile(self):
        rnd = random.Random(0)
        invs = [closed(rnd.randint(-5, 30), paid=date(2023, 1, 1) + timedelta(days=rnd.randint(0, 300)),
                       iid=str(k), amount=str(rnd.randint(1, 500))) for k in range(40)]
        book = ProfileBook(invs)
        for as_of in (date(2023, 3, 1), date(2023, 7, 1), date(2024, 1, 1)):
            a, b = book.at("c1", as_of), build_profile(invs, as_of)
            assert a.n_invoices == b.n_invoices
            assert a.mean_delay_days == pytest.approx(b.mean_delay_days)
            assert a.recency_weighted_delay_days == pytest.approx(b.recency_weighted_delay_days)
            assert a.recent_speed_to_pay_days == pytest.approx(b.recent_speed_to_pay_days)
            assert a.payment_std == pytest.approx(b.payment_std)

    def test_cold_start_gets_segment_median(self):
        paid = date(2023, 5, 1)
        invs = [closed(d, paid=paid, iid=f"x{d}", cust=f"k{d}") for d in (1, 5, 9)]
        new = Invoice("n", "newbie", "Commercial", date(2023, 6, 1), date(2023, 7, 1), Decimal(3))
        book = ProfileBook(invs + [new])
        p = book.for_invoice(new)
        assert p.cold_start and p.mean_delay_days == 5

    def test_for_invoice_as_of_issue_date(self):
        early = closed(2, paid=date(2023, 1, 10), iid="a")
        late = closed(50, paid=date(2023, 5, 10), iid="b")
        target = Invoice("t", "c1", "Commercial", date(2023, 2, 1), date(2023, 3, 3), Decimal(5))
        p = ProfileBook([early, late, target]).for_invoice(target)
        assert p.n_invoices == 1 and p.mean_delay_days == 2 and p.as_of == date(2023, 2, 1)

    def test_unknown_customer(self):
        with pytest.raises(MissingDataError):
            ProfileBook([]).at("ghost", date(2023, 1, 1))
        p = ProfileBook([]).at("ghost", date(2023, 1, 1), Segment.CSB)
        assert p.cold_start
