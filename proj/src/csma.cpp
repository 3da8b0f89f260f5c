#include "meshmac/csma.hpp"

#include <algorithm>
#include <string>

namespace meshmac {

void BackoffParams::validate() const {
    if (c_nb < 0 || c_be < 0) throw ConfigError("csma: c_nb and c_be must be non-negative");
    if (max_attempts < 1) throw ConfigError("csma: max_attempts must be at least 1");
    if (window_exponent_cap < 1 || window_exponent_cap > 30)
        throw OverflowGuard("csma: window exponent cap must be in [1, 30]");
    if (unit_backoff.count() <= 0 || txn_duration.count() <= 0)
        throw ConfigError("csma: durations must be positive");
}

BackoffWindow backoff_window(const BackoffParams& params, int attempt) {
    if (attempt < 1) throw std::invalid_argument("backoff_window: attempt must be >= 1");
    if (params.window_exponent_cap > 30) throw OverflowGuard("backoff window exponent cap too large");
    const int exponent = std::min(attempt, params.window_exponent_cap);
    const int lo = params.c_nb + params.c_be;
    return {lo, lo + (1 << exponent) - 1};
}

int draw_backoff(const BackoffParams& params, int attempt, Rng& rng) {
    const auto w = backoff_window(params, attempt);
    return static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(w.lo),
                                            static_cast<std::uint64_t>(w.hi)));
}

ChannelStatus cca(const ChannelState& channel_state, NodeId sender, int channel, SimTime now) {
    return channel_state.busy(sender, channel, now) ? ChannelStatus::busy : ChannelStatus::clear;
}

std::string_view to_string(TxnState state) {
    switch (state) {
    case TxnState::backing_off: return "backing_off";
    case TxnState::cca: return "cca";
    case TxnState::transmitting: return "transmitting";
    case TxnState::awaiting_ack: return "awaiting_ack";
    case TxnState::done: return "done";
    case TxnState::failed: return "failed";
    }
    return "?";
}

std::string_view to_string(TxnEvent event) {
    switch (event) {
    case TxnEvent::backoff_expired: return "backoff_expired";
    case TxnEvent::cca_clear: return "cca_clear";
    case TxnEvent::cca_busy: return "cca_busy";
    case TxnEvent::tx_end: return "tx_end";
    case TxnEvent::ack_received: return "ack_received";
    case TxnEvent::ack_timeout: return "ack_timeout";
    }
    return "?";
}

namespace {

TxnAction backoff_action(const BackoffParams& params, int attempt, Rng& rng) {
    return {TxnAction::Kind::schedule_backoff,
            params.unit_backoff * draw_backoff(params, attempt, rng)};
}

TxnAction fail_attempt(CsmaTransaction& txn, const BackoffParams& params, Rng& rng) {
    ++txn.attempt;
    if (txn.attempt > params.max_attempts) {
        txn.state = TxnState::failed;
        return {TxnAction::Kind::dropped, SimTime{0}};
    }
    txn.state = TxnState::backing_off;
    return backoff_action(params, txn.attempt, rng);
}

[[noreturn]] void illegal(const CsmaTransaction& txn, TxnEvent event) {
    throw IllegalTransition("event " + std::string(to_string(event)) + " in state " +
                            std::string(to_string(txn.state)));
}

}  // namespace

std::pair<CsmaTransaction, TxnAction> open_transaction(NodeId sender, NodeId receiver,
                                                       std::uint64_t packet_id,
                                                       const BackoffParams& params, Rng& rng) {
    CsmaTransaction txn{sender, receiver, packet_id, 1, TxnState::backing_off};
    if (!params.initial_backoff) return {txn, {TxnAction::Kind::schedule_backoff, SimTime{0}}};
    return {txn, backoff_action(params, 1, rng)};
}

TxnAction advance_transaction(CsmaTransaction& txn, TxnEvent event, const BackoffParams& params,
                              Rng& rng) {
    switch (txn.state) {
    case TxnState::backing_off:
        if (event != TxnEvent::backoff_expired) illegal(txn, event);
        txn.state = TxnState::cca;
        return {TxnAction::Kind::run_cca, SimTime{0}};
    case TxnState::cca:
        if (event == TxnEvent::cca_clear) {
            txn.state = TxnState::transmitting;
            return {TxnAction::Kind::start_transmission, params.txn_duration};
        }
        if (event == TxnEvent::cca_busy) return fail_attempt(txn, params, rng);
        illegal(txn, event);
    case TxnState::transmitting:
        if (event != TxnEvent::tx_end) illegal(txn, event);
        txn.state = TxnState::awaiting_ack;
        return {};
    case TxnState::awaiting_ack:
        if (event == TxnEvent::ack_received) {
            txn.state = TxnState::done;
            return {TxnAction::Kind::delivered, SimTime{0}};
        }
        if (event == TxnEvent::ack_timeout) return fail_attempt(txn, params, rng);
        illegal(txn, event);
    case TxnState::done:
    case TxnState::failed:
        illegal(txn, event);
    }
    illegal(txn, event);
}

}  // namespace meshmac
