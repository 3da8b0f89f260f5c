#pragma once

#include "meshmac/channel.hpp"
#include "meshmac/common.hpp"
#include "meshmac/rng.hpp"

#include <optional>
#include <string_view>

namespace meshmac {

/// Unslotted CSMA/CA constants. Backoff is drawn uniformly from
/// [c_nb + c_be, c_nb + c_be + 2^attempt - 1] unit slots.
struct BackoffParams {
    int c_nb = 5;
    int c_be = 7;
    int max_attempts = 8;         // transmission attempts before the packet is dropped
    int window_exponent_cap = 8;  // attempts beyond this reuse the capped window
    SimTime unit_backoff{1000};
    SimTime txn_duration{4000};   // data + turnaround + ACK
    bool initial_backoff = true;  // false: a fresh packet goes straight to CCA, backoff only after failure

    void validate() const;
};

struct BackoffWindow {
    int lo = 0;
    int hi = 0;

    friend bool operator==(const BackoffWindow&, const BackoffWindow&) = default;
};

BackoffWindow backoff_window(const BackoffParams& params, int attempt);

/// Backoff length in unit slots, uniform over backoff_window().
int draw_backoff(const BackoffParams& params, int attempt, Rng& rng);

enum class ChannelStatus { clear, busy };

/// Single clear channel assessment: busy iff a neighbor of `sender` is on the
/// air on `channel`. Hidden (non-neighbor) transmissions are invisible.
ChannelStatus cca(const ChannelState& channel_state, NodeId sender, int channel, SimTime now);

enum class TxnState { backing_off, cca, transmitting, awaiting_ack, done, failed };
enum class TxnEvent { backoff_expired, cca_clear, cca_busy, tx_end, ack_received, ack_timeout };

std::string_view to_string(TxnState state);
std::string_view to_string(TxnEvent event);

struct CsmaTransaction {
    NodeId sender = 0;
    NodeId receiver = 0;
    std::uint64_t packet_id = 0;
    int attempt = 1;
    TxnState state = TxnState::backing_off;
};

/// What the engine must do after a transition.
struct TxnAction {
    enum class Kind { none, schedule_backoff, run_cca, start_transmission, delivered, dropped };
    Kind kind = Kind::none;
    SimTime delay{0};  // schedule_backoff: time until the next CCA; start_transmission: airtime
};

/// Opens a transaction for a fresh packet (attempt 1) and draws its first backoff
/// (zero-length when initial_backoff is off).
std::pair<CsmaTransaction, TxnAction> open_transaction(NodeId sender, NodeId receiver,
                                                       std::uint64_t packet_id,
                                                       const BackoffParams& params, Rng& rng);

/// Drives the state machine
///   backing_off -> cca -> (transmitting | backing_off) -> awaiting_ack -> (done | backing_off)
/// Busy CCA and a missing ACK both count as a failed attempt; exceeding
/// max_attempts moves to `failed`. Throws IllegalTransition on a mismatched event.
TxnAction advance_transaction(CsmaTransaction& txn, TxnEvent event, const BackoffParams& params,
                              Rng& rng);

}  // namespace meshmac
