"""Numba kernels for the per-column hot loops.

Everything here operates on full (L, N) float64 arrays with layer index 0 at
the top of the ladder. ``ktop`` is the (level-pool) top wet layer shared by
all columns; ``kbot[i]`` is each column's deepest open layer. Cells outside
[ktop, kbot] carry zero volume and zero flux. Kernels mutate their state
arrays in place; none of them allocates per call beyond small scratch.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def density_at(t_c: float) -> float:
    # polynomial fit; exactly 1000.0 at t = 3.9863
    return 1000.0 * (
        1.0
        - ((t_c + 288.9414) / (508929.2 * (t_c + 68.12963))) * (t_c - 3.9863) ** 2
    )


@njit(cache=True)
def convective_adjust(temp, do, bod, vol, ktop, kbot, tol):
    """Mix statically unstable cells until density is non-decreasing downward.

    Single top-down block-merge pass per column: push each cell as a block,
    merge while the block above is denser (volume-weighted means for all
    constituents), write the block means back. Returns total merge count.
    """
    n_layers, n_seg = temp.shape
    blk_lo = np.empty(n_layers, dtype=np.int64)   # first layer of block
    blk_hi = np.empty(n_layers, dtype=np.int64)   # last layer of block
    blk_v = np.empty(n_layers)
    blk_vt = np.empty(n_layers)
    blk_vdo = np.empty(n_layers)
    blk_vbod = np.empty(n_layers)
    merges = 0
    for i in range(n_seg):
        kb = kbot[i]
        if kb < ktop:
            continue
        top = -1  # stack top index
        for k in range(ktop, kb + 1):
            v = vol[k, i]
            if v <= 0.0:
                continue
            top += 1
            blk_lo[top] = k
            blk_hi[top] = k
            blk_v[top] = v
            blk_vt[top] = v * temp[k, i]
            blk_vdo[top] = v * do[k, i]
            blk_vbod[top] = v * bod[k, i]
            while top > 0:
                rho_above = density_at(blk_vt[top - 1] / blk_v[top - 1])
                rho_below = density_at(blk_vt[top] / blk_v[top])
                if rho_above > rho_below + tol:
                    blk_hi[top - 1] = blk_hi[top]
                    blk_v[top - 1] += blk_v[top]
                    blk_vt[top - 1] += blk_vt[top]
                    blk_vdo[top - 1] += blk_vdo[top]
                    blk_vbod[top - 1] += blk_vbod[top]
                    top -= 1
                    merges += 1
                else:
                    break
        for b in range(top + 1):
            if blk_hi[b] > blk_lo[b]:
                t_mix = blk_vt[b] / blk_v[b]
                do_mix = blk_vdo[b] / blk_v[b]
                bod_mix = blk_vbod[b] / blk_v[b]
                for k in range(blk_lo[b], blk_hi[b] + 1):
                    if vol[k, i] > 0.0:
                        temp[k, i] = t_mix
                        do[k, i] = do_mix
                        bod[k, i] = bod_mix
    return merges


@njit(cache=True)
def wind_entrain(temp, do, bod, vol, z_center, ktop, kbot, energy_j, gravity):
    """Kraus-Turner style wind deepening.

    Per column, repeatedly compare the potential-energy cost of mixing the
    slab [ktop..m] with the next layer down against the remaining turbulent
    energy budget ``energy_j[i]`` (J per column). Statically unstable
    candidates cost nothing. Mixing mixes T, DO, and BOD. Returns the number
    of layers entrained (summed over columns).

    The slab is always homogeneous, so its PE contribution reduces to its
    running sum of z*v and one density; cells are written once at the end.
    """
    n_layers, n_seg = temp.shape
    entrained = 0
    for i in range(n_seg):
        kb = kbot[i]
        if kb <= ktop:
            continue
        e_avail = energy_j[i]
        if e_avail <= 0.0:
            continue
        slab_v = vol[ktop, i]
        slab_vt = slab_v * temp[ktop, i]
        slab_vdo = slab_v * do[ktop, i]
        slab_vbod = slab_v * bod[ktop, i]
        slab_zv = z_center[ktop, i] * slab_v
        t_slab = temp[ktop, i]
        m = ktop
        while m < kb:
            k_next = m + 1
            v_next = vol[k_next, i]
            if v_next <= 0.0:
                break
            new_v = slab_v + v_next
            new_vt = slab_vt + v_next * temp[k_next, i]
            t_mix = new_vt / new_v
            rho_mix = density_at(t_mix)
            dpe = gravity * (
                slab_zv * (rho_mix - density_at(t_slab))
                + z_center[k_next, i] * v_next
                * (rho_mix - density_at(temp[k_next, i]))
            )
            if dpe > e_avail:
                break
            if dpe > 0.0:
                e_avail -= dpe
            slab_v = new_v
            slab_vt = new_vt
            slab_vdo += v_next * do[k_next, i]
            slab_vbod += v_next * bod[k_next, i]
            slab_zv += z_center[k_next, i] * v_next
            t_slab = t_mix
            m = k_next
            entrained += 1
        if m > ktop:
            t_mix = slab_vt / slab_v
            do_mix = slab_vdo / slab_v
            bod_mix = slab_vbod / slab_v
            for k in range(ktop, m + 1):
                if vol[k, i] > 0.0:
                    temp[k, i] = t_mix
                    do[k, i] = do_mix
                    bod[k, i] = bod_mix
    return entrained


@njit(cache=True)
def placement_field(rho, ktop, kb_col, kb_lim, rho_in, cols, w):
    """Density-placement weights for many columns at once.

    For each receiving column ``cols[j]`` (with its own bed ``kb_col[j]``):
    inflow lighter than the surface spreads as a delta at ``ktop``, denser
    than the bed as a delta at the bed, otherwise a triangular kernel around
    the first layer at least as dense as ``rho_in``. Weights are truncated
    to [ktop, kb_lim[j]] and renormalized; ``w`` must come in zeroed.
    """
    n_cols = cols.size
    for j in range(n_cols):
        i = cols[j]
        kb = kb_col[j]
        lim = kb_lim[j]
        over = rho_in <= rho[ktop, i]
        under = False
        c = ktop
        if not over:
            if rho_in >= rho[kb, i]:
                under = True
                c = kb
            else:
                first = kb
                for k in range(ktop, kb + 1):
                    if rho[k, i] >= rho_in:
                        first = k
                        break
                c = first - 1
        if c < ktop:
            c = ktop
        if c > lim:
            c = lim
        total = 0.0
        for k in range(ktop, lim + 1):
            if over:
                wv = 1.0 if k == ktop else 0.0
            elif under:
                wv = 1.0 if k == c else 0.0
            else:
                wv = 1.0 - abs(k - c) / 2.0
                if wv < 0.0:
                    wv = 0.0
            w[k, j] = wv
            total += wv
        if total <= 0.0:
            w[c, j] = 1.0
            total = 1.0
        inv = 1.0 / total
        for k in range(ktop, lim + 1):
            w[k, j] *= inv


@njit(cache=True)
def cfl_worst(qh, u, wd, ev, ktop, v0, v1, dt, target):
    """Worst per-cell sub-step requirement for the donor-cell CFL bound.

    Mirrors ``FlowField.outflow_rate`` cell by cell; volume surrendered to
    a falling surface counts toward the export allowance.
    """
    n_layers, n_seg = wd.shape
    worst = 0.0
    for i in range(n_seg):
        for k in range(n_layers):
            load = wd[k, i]
            if i < n_seg - 1:
                load += qh[k, i]
            if k == ktop:
                load += ev[i]
            uu = u[k, i]
            if uu > 0.0:
                load += uu
            if k + 1 < n_layers:
                ub = u[k + 1, i]
                if ub < 0.0:
                    load -= ub
            load *= dt
            va = v0[k, i]
            vb = v1[k, i]
            if vb >= va:
                req = load / (target * va) if va > 0.0 else 0.0
            else:
                req = (load - target * (va - vb)) / (target * vb) if vb > 0.0 else 0.0
            if req > worst:
                worst = req
    return worst


@njit(cache=True)
def kinetics_field(temp, do, bod, vol, contact, ktop, kbot,
                   k_bod_20, ln_theta_bod, sod_20, ln_theta_sod, dt_d):
    """BOD decay and sediment demand with a hard DO floor, in place.

    Demand beyond the available DO is discarded and attributed pro rata.
    Returns (bod_consumed, sod_consumed, discarded, bod_decayed) in grams.
    """
    n_layers, n_seg = temp.shape
    sum_cb = 0.0
    sum_cs = 0.0
    sum_disc = 0.0
    sum_dec = 0.0
    for i in range(n_seg):
        kb = kbot[i]
        for k in range(ktop, kb + 1):
            v = vol[k, i]
            if v <= 0.0:
                continue
            tt = temp[k, i] - 20.0
            k_bod = k_bod_20 * np.exp(ln_theta_bod * tt)
            dec = bod[k, i] * (1.0 - np.exp(-k_bod * dt_d))
            sod = sod_20 * np.exp(ln_theta_sod * tt) * contact[k, i] * dt_d / v
            demand = dec + sod
            avail = do[k, i]
            consumed = demand if demand < avail else avail
            if consumed < 0.0:
                consumed = 0.0
            cb = consumed * (dec / demand) if demand > 0.0 else 0.0
            bod[k, i] -= dec
            do[k, i] -= consumed
            sum_cb += cb * v
            sum_cs += (consumed - cb) * v
            sum_disc += (demand - consumed) * v
            sum_dec += dec * v
    return sum_cb, sum_cs, sum_disc, sum_dec


@njit(cache=True)
def thomas_diffuse(conc, vol, cond, ktop, kbot, dt):
    """Implicit vertical diffusion, one constituent, all columns.

    ``cond[k, i]`` is the interface conductance (m3 s-1) between layers k
    and k+1; zero-flux at the surface and the bed. The system is the
    conservative finite-volume discretization, so column totals of
    vol*conc are preserved to roundoff.
    """
    n_layers, n_seg = conc.shape
    cp = np.empty(n_layers)
    dp = np.empty(n_layers)
    for i in range(n_seg):
        kb = kbot[i]
        nz = kb - ktop + 1
        if nz < 2:
            continue
        # forward sweep of the Thomas algorithm
        for idx in range(nz):
            k = ktop + idx
            g_up = cond[k - 1, i] if idx > 0 else 0.0
            g_dn = cond[k, i] if idx < nz - 1 else 0.0
            diag = vol[k, i] + dt * (g_up + g_dn)
            upper = -dt * g_dn
            lower = -dt * g_up
            rhs = vol[k, i] * conc[k, i]
            if idx == 0:
                cp[idx] = upper / diag
                dp[idx] = rhs / diag
            else:
                denom = diag - lower * cp[idx - 1]
                cp[idx] = upper / denom
                dp[idx] = (rhs - lower * dp[idx - 1]) / denom
        conc[kb, i] = dp[nz - 1]
        for idx in range(nz - 2, -1, -1):
            conc[ktop + idx, i] = dp[idx] - cp[idx] * conc[ktop + idx + 1, i]


@njit(cache=True)
def thomas_diffuse3(c0, c1, c2, vol, cond, ktop, kbot, dt):
    """Implicit vertical diffusion of three constituents sharing one matrix.

    Same system as :func:`thomas_diffuse`; the factorization is done once
    per column and back-solved for each field.
    """
    n_layers, n_seg = c0.shape
    cp = np.empty(n_layers)
    d0 = np.empty(n_layers)
    d1 = np.empty(n_layers)
    d2 = np.empty(n_layers)
    for i in range(n_seg):
        kb = kbot[i]
        nz = kb - ktop + 1
        if nz < 2:
            continue
        for idx in range(nz):
            k = ktop + idx
            g_up = cond[k - 1, i] if idx > 0 else 0.0
            g_dn = cond[k, i] if idx < nz - 1 else 0.0
            diag = vol[k, i] + dt * (g_up + g_dn)
            upper = -dt * g_dn
            lower = -dt * g_up
            v = vol[k, i]
            if idx == 0:
                cp[idx] = upper / diag
                d0[idx] = v * c0[k, i] / diag
                d1[idx] = v * c1[k, i] / diag
                d2[idx] = v * c2[k, i] / diag
            else:
                denom = diag - lower * cp[idx - 1]
                cp[idx] = upper / denom
                d0[idx] = (v * c0[k, i] - lower * d0[idx - 1]) / denom
                d1[idx] = (v * c1[k, i] - lower * d1[idx - 1]) / denom
                d2[idx] = (v * c2[k, i] - lower * d2[idx - 1]) / denom
        c0[kb, i] = d0[nz - 1]
        c1[kb, i] = d1[nz - 1]
        c2[kb, i] = d2[nz - 1]
        for idx in range(nz - 2, -1, -1):
            k = ktop + idx
            c0[k, i] = d0[idx] - cp[idx] * c0[k + 1, i]
            c1[k, i] = d1[idx] - cp[idx] * c1[k + 1, i]
            c2[k, i] = d2[idx] - cp[idx] * c2[k + 1, i]


@njit(cache=True)
def advect_pass(
    temp, do, bod,
    temp_out, do_out, bod_out,
    qh, u, ins, wd, ev,
    v_a, v_b,
    ktop_ev, kbot, dt,
    t_in, do_in, bod_in,
    audit,
):
    """One CFL-satisfying upwind transport pass over all constituents.

    Reads donor values from (temp, do, bod), writes results to the *_out
    buffers. Fluxes (m3 s-1): ``qh[k, i]`` toward the dam from column i to
    i+1 (always >= 0), ``u[k, i]`` through the *top* interface of layer k
    (positive upward), ``ins`` boundary insertion carrying the inflow
    properties, ``wd`` withdrawal and ``ev`` (per column, applied at layer
    ``ktop_ev``) carrying local cell properties. ``v_a``/``v_b`` are cell
    volumes at the start/end of the pass. Mass left in a cell that dries
    (v_b == 0) is flushed into the cell below. ``audit`` (3 constituents x
    4 terms: insertion, withdrawal, evaporation, negative-clip) accumulates
    boundary mass in concentration*m3 units.
    """
    n_layers, n_seg = temp.shape
    m_t = np.empty(n_layers)
    m_do = np.empty(n_layers)
    m_bod = np.empty(n_layers)
    for i in range(n_seg):
        kb = kbot[i]
        if kb < 0:
            continue
        for k in range(0, kb + 1):
            in_t = 0.0
            in_do = 0.0
            in_bod = 0.0
            q_ins = ins[k, i]
            if q_ins > 0.0:
                in_t += q_ins * t_in
                in_do += q_ins * do_in
                in_bod += q_ins * bod_in
                audit[0, 0] += dt * q_ins * t_in
                audit[1, 0] += dt * q_ins * do_in
                audit[2, 0] += dt * q_ins * bod_in
            if i > 0:
                q = qh[k, i - 1]
                if q > 0.0:
                    in_t += q * temp[k, i - 1]
                    in_do += q * do[k, i - 1]
                    in_bod += q * bod[k, i - 1]
            if k < kb:
                uu = u[k + 1, i]
                if uu > 0.0:  # upward through my bottom interface
                    in_t += uu * temp[k + 1, i]
                    in_do += uu * do[k + 1, i]
                    in_bod += uu * bod[k + 1, i]
            ut = u[k, i]
            if ut < 0.0 and k > 0:  # downward through my top interface
                q = -ut
                in_t += q * temp[k - 1, i]
                in_do += q * do[k - 1, i]
                in_bod += q * bod[k - 1, i]
            out = 0.0
            if i < n_seg - 1:
                out += qh[k, i]
            q_wd = wd[k, i]
            if q_wd > 0.0:
                out += q_wd
                audit[0, 1] += dt * q_wd * temp[k, i]
                audit[1, 1] += dt * q_wd * do[k, i]
                audit[2, 1] += dt * q_wd * bod[k, i]
            if k == ktop_ev:
                q_ev = ev[i]
                if q_ev > 0.0:
                    out += q_ev
                    audit[0, 2] += dt * q_ev * temp[k, i]
                    audit[1, 2] += dt * q_ev * do[k, i]
                    audit[2, 2] += dt * q_ev * bod[k, i]
            if ut > 0.0:
                out += ut
            if k < kb and u[k + 1, i] < 0.0:
                out += -u[k + 1, i]
            m_t[k] = v_a[k, i] * temp[k, i] + dt * (in_t - out * temp[k, i])
            m_do[k] = v_a[k, i] * do[k, i] + dt * (in_do - out * do[k, i])
            m_bod[k] = v_a[k, i] * bod[k, i] + dt * (in_bod - out * bod[k, i])
        # write out; flush mass stranded in drying cells downward
        for k in range(0, kb + 1):
            vb = v_b[k, i]
            if vb > 0.0:
                ct = m_t[k] / vb
                cdo = m_do[k] / vb
                cbod = m_bod[k] / vb
                if cdo < 0.0:
                    audit[1, 3] += vb * cdo
                    cdo = 0.0
                if cbod < 0.0:
                    audit[2, 3] += vb * cbod
                    cbod = 0.0
                temp_out[k, i] = ct
                do_out[k, i] = cdo
                bod_out[k, i] = cbod
            else:
                if k < kb:
                    m_t[k + 1] += m_t[k]
                    m_do[k + 1] += m_do[k]
                    m_bod[k + 1] += m_bod[k]
                elif m_t[k] != 0.0 or m_do[k] != 0.0 or m_bod[k] != 0.0:
                    audit[0, 3] += m_t[k]
                    audit[1, 3] += m_do[k]
                    audit[2, 3] += m_bod[k]
                temp_out[k, i] = 0.0
                do_out[k, i] = 0.0
                bod_out[k, i] = 0.0
        for k in range(kb + 1, n_layers):
            temp_out[k, i] = temp[k, i]
            do_out[k, i] = do[k, i]
            bod_out[k, i] = bod[k, i]
