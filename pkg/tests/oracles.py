"""Independent reference models the implementation is checked against.

Each oracle is a deliberately naive, straight-line re-statement of the
intended behavior (discrete-event scan for block cutting, sequential
re-execution for MVCC, a running-gate scan for the recorder). They share no
code with the package under test.
"""

from __future__ import annotations

TIMEOUT = "timeout"
MAX_MESSAGES = "max_messages"


def expected_cuts(
    arrivals_ns,
    batch_timeout_ns,
    max_messages,
    max_batch_bytes=None,
    sizes=None,
):
    """Discrete-event simulation of the block-cutting policy.

    arrivals_ns: sorted submission times. sizes: per-tx encoded sizes (only
    consulted when max_batch_bytes is set). Returns a list of
    (cut_time_ns, tx_count, reason). Ties between a timeout and an arrival
    at the same instant resolve in favor of the timeout, because the timer
    was scheduled first.
    """
    arrivals = list(arrivals_ns)
    if sizes is None:
        sizes = [0] * len(arrivals)
    cuts = []
    queued = 0  # txs currently pending
    queued_bytes = 0
    deadline = None  # pending timeout instant
    i = 0

    def cut(now_ns, reason):
        nonlocal queued, queued_bytes, deadline
        take = min(queued, max_messages)
        cuts.append((now_ns, take, reason))
        queued -= take
        if queued:
            queued_bytes = 0  # only reachable via manual cut_block, bytes untracked
            deadline = now_ns + batch_timeout_ns
        else:
            queued_bytes = 0
            deadline = None

    while i < len(arrivals) or queued:
        next_arrival = arrivals[i] if i < len(arrivals) else None
        if deadline is not None and (next_arrival is None or deadline <= next_arrival):
            cut(deadline, TIMEOUT)
            continue
        queued += 1
        queued_bytes += sizes[i]
        if queued == 1:
            deadline = next_arrival + batch_timeout_ns
        crossed_bytes = max_batch_bytes is not None and queued_bytes > max_batch_bytes
        if queued >= max_messages or crossed_bytes:
            cut(next_arrival, MAX_MESSAGES)
        i += 1
    return cuts


def expected_recorded(stamps_ns, period_ns):
    """Rate gate: first message always passes, then any gap >= period."""
    recorded = []
    last = None
    for t in stamps_ns:
        if last is None or t - last >= period_ns:
            recorded.append(t)
            last = t
    return recorded


def mvcc_apply(entries, txs, block_no):
    """Sequential re-execution of one block against live state.

    entries: {key: (value, (block, txidx))}. txs: [(read_set, write_set)]
    with read_set [(key, version-or-None)] and write_set
    [(key, value, is_delete)]. Returns (codes, final_entries) where codes
    are "VALID" / "MVCC_READ_CONFLICT" strings.
    """
    live = dict(entries)
    codes = []
    for tx_index, (read_set, write_set) in enumerate(txs):
        stale = False
        for key, version in read_set:
            current = live.get(key)
            current_version = current[1] if current is not None else None
            if current_version != version:
                stale = True
                break
        if stale:
            codes.append("MVCC_READ_CONFLICT")
            continue
        for key, value, is_delete in write_set:
            if is_delete:
                live.pop(key, None)
            else:
                live[key] = (value, (block_no, tx_index))
        codes.append("VALID")
    return codes, live


def filtered_range(entries, prefix):
    """Brute-force range query: filter a full dump and sort by key."""
    return sorted(
        (key, value, version)
        for key, (value, version) in entries.items()
        if key.startswith(prefix)
    )
