"""Independent reference implementations used only to check the library.

Everything here recomputes quantities by direct enumeration or naive
sequential replay, sharing no code path with the implementations under test.
"""

from __future__ import annotations

import math
from itertools import product


def canonical_marginal(log, z, params):
    """Total probability of a log by enumerating latent-increment trajectories.

    Walks the observed draws in order; at each draw branches on whether the
    receiver came from the local mass or escaped through the global urn,
    tracking only the collapsed counts (D, V and their totals).  Includes the
    sequential sender-slot probability and the size factor.
    """
    obs = [(z[n], r) for n, rec in enumerate(log.records) for r in rec.receivers]

    def g_weight(r, v_r, m, k):
        vr = v_r.get(r, 0)
        if vr > 0:
            return (vr - params.alpha) / (m + params.theta)
        return max(params.theta + params.alpha * k, 0.0) / (m + params.theta)

    def walk(i, d, v, v_tot, m_s, v_r, m):
        if i == len(obs):
            return 1.0
        s, r = obs[i]
        alpha_s, theta_s = params.local_params(s)
        denom = m_s.get(s, 0) + theta_s
        total = 0.0
        d_sr = d.get(s, {}).get(r, 0)
        v_sr = v.get(s, {}).get(r, 0)
        if d_sr > 0:
            w = (d_sr - alpha_s * v_sr) / denom
            if w > 0.0:
                d[s][r] += 1
                m_s[s] += 1
                total += w * walk(i + 1, d, v, v_tot, m_s, v_r, m)
                d[s][r] -= 1
                m_s[s] -= 1
        esc = (theta_s + alpha_s * v_tot.get(s, 0)) / denom
        esc *= g_weight(r, v_r, m, len(v_r))
        if esc > 0.0:
            d.setdefault(s, {})[r] = d_sr + 1
            v.setdefault(s, {})[r] = v_sr + 1
            v_tot[s] = v_tot.get(s, 0) + 1
            m_s[s] = m_s.get(s, 0) + 1
            v_r[r] = v_r.get(r, 0) + 1
            total += esc * walk(i + 1, d, v, v_tot, m_s, v_r, m + 1)
            v_r[r] -= 1
            if v_r[r] == 0:
                del v_r[r]
            m_s[s] -= 1
            v_tot[s] -= 1
            v[s][r] -= 1
            if v[s][r] == 0:
                del v[s][r]
            d[s][r] = d_sr
            if d[s][r] == 0:
                del d[s][r]
        return total

    return (
        walk(0, {}, {}, {}, {}, {}, 0)
        * sender_sequence_prob(log, params)
        * size_prob(log, z, params)
        * attribution_sequence_prob(log, z, params)
    )


def sender_sequence_prob(log, params):
    """Sequential sender-urn probability, slot by slot."""
    out, n, distinct = {}, 0, 0
    p = 1.0
    for rec in log.records:
        for s in rec.senders:
            if s in out:
                p *= (out[s] - params.sender_alpha) / (n + params.sender_theta)
            else:
                p *= max(params.sender_theta + params.sender_alpha * distinct, 0.0) / (
                    n + params.sender_theta
                )
                distinct += 1
            out[s] = out.get(s, 0) + 1
            n += 1
    return p


def attribution_sequence_prob(log, z, params):
    """Sequential probability of the attribution path (ones for forced picks)."""
    deg: dict = {}
    p = 1.0
    for rec, zi in zip(log.records, z):
        cands = sorted(set(rec.senders))
        ws = []
        for s in cands:
            if s in deg:
                ws.append(deg[s] - params.z_alpha)
            else:
                ws.append(params.z_theta + params.z_alpha * len(deg))
        p *= ws[cands.index(zi)] / sum(ws)
        deg[zi] = deg.get(zi, 0) + 1
    return p


def size_prob(log, z, params):
    p = 1.0
    if params.size_dist is not None:
        for rec in log.records:
            p *= params.size_dist.get(rec.k1, 0.0)
    if params.local_size_dist or params.local_size_default is not None:
        for rec, zi in zip(log.records, z):
            p *= params.size_dist_for(zi).get(rec.k2, 0.0)
    return p


def enumerate_canonical_receiver_patterns(length, max_distinct):
    """All restricted-growth sequences of the given length (first use in order)."""
    patterns = []

    def rec(prefix, used):
        if len(prefix) == length:
            patterns.append(tuple(prefix))
            return
        for v in range(min(used + 1, max_distinct)):
            rec(prefix + [v], max(used, v + 1))

    rec([], 0)
    return patterns


def enumerate_canonical_logs(n_interactions, total_slots, max_senders, max_receivers):
    """Every canonical log shape with the given interaction count and slot total.

    Yields (sender_pattern, receiver_lists): single-sender interactions with
    canonical sender ids, receiver slots filled by a canonical pattern split
    into the composition's parts.
    """
    def compositions(total, parts):
        if parts == 1:
            yield (total,)
            return
        for first in range(1, total - parts + 2):
            for rest in compositions(total - first, parts - 1):
                yield (first, *rest)

    sender_patterns = enumerate_canonical_receiver_patterns(n_interactions, max_senders)
    receiver_patterns = enumerate_canonical_receiver_patterns(total_slots, max_receivers)
    out = []
    for comp in compositions(total_slots, n_interactions):
        for sp in sender_patterns:
            for rp in receiver_patterns:
                lists = []
                pos = 0
                for k in comp:
                    lists.append(tuple(rp[pos:pos + k]))
                    pos += k
                out.append((sp, tuple(lists)))
    return out


def dirichlet_process_new_prob(n, theta):
    """Closed-form new-item probability of a zero-discount urn after n draws."""
    return theta / (n + theta)


def global_urn_dist(lat, params):
    """Explicit global-urn распределение over (existing receivers, new)."""
    m = lat.latent_grand_total
    k = len(lat.latent_receiver_total)
    denom = m + params.theta
    dist = {r: (v - params.alpha) / denom for r, v in lat.latent_receiver_total.items()}
    dist["new"] = max(params.theta + params.alpha * k, 0.0) / denom
    return dist
