#include "meshmac/csma.hpp"

#include <doctest.h>

#include <cmath>
#include <map>

using namespace meshmac;

TEST_CASE("backoff_window") {
    const BackoffParams p;
    CHECK(backoff_window(p, 1) == BackoffWindow{12, 13});
    CHECK(backoff_window(p, 3) == BackoffWindow{12, 19});
    CHECK(backoff_window(p, 8) == BackoffWindow{12, 12 + 255});
    CHECK(backoff_window(p, 12) == backoff_window(p, 8));  // exponent capped

    BackoffParams zero;
    zero.c_nb = 0;
    zero.c_be = 0;
    CHECK_THROWS(backoff_window(zero, 0));
    CHECK(backoff_window(zero, 1) == BackoffWindow{0, 1});

    BackoffParams huge;
    huge.window_exponent_cap = 40;
    CHECK_THROWS_AS(backoff_window(huge, 35), OverflowGuard);
    CHECK_THROWS_AS(huge.validate(), OverflowGuard);
}

TEST_CASE("draw_backoff: support, uniformity, determinism") {
    const BackoffParams p;
    Rng rng(1, Rng::kNodeBase + 3);
    for (int i = 0; i < 1000; ++i) {
        const int v = draw_backoff(p, 1, rng);
        CHECK((v == 12 || v == 13));
    }

    // chi-square over the 8 values of (12, 19), 1e5 draws, 7 dof: 24.32 is the 0.999 quantile
    std::map<int, int> counts;
    const int n = 100'000;
    for (int i = 0; i < n; ++i) ++counts[draw_backoff(p, 3, rng)];
    REQUIRE(counts.size() == 8);
    double chi2 = 0.0;
    for (const auto& [v, c] : counts) {
        CHECK(v >= 12);
        CHECK(v <= 19);
        CHECK(std::abs(static_cast<double>(c) / n - 0.125) < 0.005);
        const double expected = n / 8.0;
        chi2 += (c - expected) * (c - expected) / expected;
    }
    CHECK(chi2 < 24.32);

    Rng a(9, 4), b(9, 4);
    for (int i = 0; i < 100; ++i) CHECK(draw_backoff(p, 5, a) == draw_backoff(p, 5, b));
}

TEST_CASE("transaction: clear CCA transmits for the transaction time") {
    BackoffParams p;
    Rng rng(1, 1);
    auto [txn, first] = open_transaction(4, 0, 77, p, rng);
    CHECK(txn.state == TxnState::backing_off);
    CHECK(txn.attempt == 1);
    CHECK(first.kind == TxnAction::Kind::schedule_backoff);
    CHECK(first.delay >= p.unit_backoff * 12);
    CHECK(first.delay <= p.unit_backoff * 13);

    CHECK(advance_transaction(txn, TxnEvent::backoff_expired, p, rng).kind == TxnAction::Kind::run_cca);
    const auto go = advance_transaction(txn, TxnEvent::cca_clear, p, rng);
    CHECK(go.kind == TxnAction::Kind::start_transmission);
    CHECK(go.delay == SimTime{4000});
    CHECK(txn.state == TxnState::transmitting);
    CHECK(advance_transaction(txn, TxnEvent::tx_end, p, rng).kind == TxnAction::Kind::none);
    CHECK(advance_transaction(txn, TxnEvent::ack_received, p, rng).kind == TxnAction::Kind::delivered);
    CHECK(txn.state == TxnState::done);
    CHECK_THROWS_AS(advance_transaction(txn, TxnEvent::cca_clear, p, rng), IllegalTransition);
}

TEST_CASE("transaction: missing ACK widens the window") {
    BackoffParams p;
    Rng rng(2, 1);
    CsmaTransaction txn{1, 0, 5, 2, TxnState::awaiting_ack};
    const auto next = advance_transaction(txn, TxnEvent::ack_timeout, p, rng);
    CHECK(txn.state == TxnState::backing_off);
    CHECK(txn.attempt == 3);
    CHECK(next.kind == TxnAction::Kind::schedule_backoff);
    CHECK(next.delay >= p.unit_backoff * 12);
    CHECK(next.delay <= p.unit_backoff * 19);
}

TEST_CASE("transaction: retry exhaustion") {
    BackoffParams p;
    Rng rng(3, 1);
    CsmaTransaction txn{1, 0, 5, p.max_attempts, TxnState::cca};
    CHECK(advance_transaction(txn, TxnEvent::cca_busy, p, rng).kind == TxnAction::Kind::dropped);
    CHECK(txn.state == TxnState::failed);
    CHECK_THROWS_AS(advance_transaction(txn, TxnEvent::backoff_expired, p, rng), IllegalTransition);
}

TEST_CASE("transaction: illegal events") {
    BackoffParams p;
    Rng rng(4, 1);
    CsmaTransaction txn{1, 0, 5, 1, TxnState::backing_off};
    CHECK_THROWS_AS(advance_transaction(txn, TxnEvent::cca_clear, p, rng), IllegalTransition);
    txn.state = TxnState::cca;
    CHECK_THROWS_AS(advance_transaction(txn, TxnEvent::tx_end, p, rng), IllegalTransition);
    txn.state = TxnState::transmitting;
    CHECK_THROWS_AS(advance_transaction(txn, TxnEvent::ack_received, p, rng), IllegalTransition);
}

TEST_CASE("transaction: without initial backoff a fresh packet senses at once") {
    BackoffParams p;
    p.initial_backoff = false;
    Rng rng(5, 1), untouched(5, 1);
    auto [txn, first] = open_transaction(2, 0, 1, p, rng);
    CHECK(first.kind == TxnAction::Kind::schedule_backoff);
    CHECK(first.delay == SimTime{0});
    CHECK(rng.next() == untouched.next());  // no draw consumed
    advance_transaction(txn, TxnEvent::backoff_expired, p, rng);
    const auto busy = advance_transaction(txn, TxnEvent::cca_busy, p, rng);
    CHECK(busy.delay >= p.unit_backoff * 12);  // failures still back off
}

TEST_CASE("BackoffParams validation") {
    BackoffParams p;
    CHECK_NOTHROW(p.validate());
    p.max_attempts = 0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = {};
    p.c_nb = -1;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = {};
    p.unit_backoff = SimTime{0};
    CHECK_THROWS_AS(p.validate(), ConfigError);
}
