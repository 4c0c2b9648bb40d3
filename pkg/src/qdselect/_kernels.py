"""Jitted batch kernels for path evaluation and robot simulation.

These mirror the reference geometry in :mod:`qdselect.maze` (event-interval
wall intersection, ring-crossing state machine) but run as compiled loops so
evolution runs stay fast. Tests cross-check them against the reference
implementations.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

TWO_PI = 2.0 * math.pi


@njit(cache=True, inline="always")
def _in_gate(px, py, r, ring, gate_ux, gate_uy, cos_half):
    """Gate id containing the direction of (px, py), else 0.

    Membership by dot product against the gate-center unit vector:
    equivalent to an angular-distance test for arcs narrower than 180 deg.
    """
    thresh = r * cos_half
    for g in range(gate_ux.shape[1]):
        if px * gate_ux[ring, g] + py * gate_uy[ring, g] >= thresh:
            return g + 1
    return 0


@njit(cache=True)
def _point_in_wall(x, y, lo2, hi2, gate_ux, gate_uy, cos_half):
    """Wall membership using squared radial bands (lo2/hi2 = (R -+ h)^2)."""
    r2 = x * x + y * y
    for ring in range(lo2.shape[0]):
        if lo2[ring] <= r2 <= hi2[ring]:
            if _in_gate(x, y, math.sqrt(r2), ring, gate_ux, gate_uy, cos_half) == 0:
                return True
    return False


@njit(cache=True)
def _segment_wall_hit(p0x, p0y, p1x, p1y, radii, lo2, hi2,
                      gate_ux, gate_uy, cos_half, edge_cos, edge_sin, ts):
    """Parameter in [0, 1] of the first wall entry on a segment, or 2.0.

    The segment start is assumed to be outside wall material. Candidate
    parameters are annulus-boundary and gate-edge crossings; wall membership
    is constant between candidates, so interval midpoints decide exactly.
    ``ts`` is caller-provided scratch of length >= 32.
    """
    dx = p1x - p0x
    dy = p1y - p0y
    seg2 = dx * dx + dy * dy
    if seg2 == 0.0:
        return 2.0
    n = 0
    r02 = p0x * p0x + p0y * p0y
    r12 = p1x * p1x + p1y * p1y
    rmax2 = r02 if r02 > r12 else r12
    pd = p0x * dx + p0y * dy
    tc = -pd / seg2
    if tc < 0.0:
        tc = 0.0
    elif tc > 1.0:
        tc = 1.0
    cx = p0x + tc * dx
    cy = p0y + tc * dy
    rmin2 = cx * cx + cy * cy
    b = 2.0 * pd
    for ring in range(radii.shape[0]):
        if rmax2 < lo2[ring] or rmin2 > hi2[ring]:
            continue
        for side in range(2):
            rad2 = lo2[ring] if side == 0 else hi2[ring]
            c = r02 - rad2
            disc = b * b - 4.0 * seg2 * c
            if disc > 0.0:
                sq = math.sqrt(disc)
                t1 = (-b - sq) / (2.0 * seg2)
                t2 = (-b + sq) / (2.0 * seg2)
                if 0.0 < t1 < 1.0:
                    ts[n] = t1
                    n += 1
                if 0.0 < t2 < 1.0:
                    ts[n] = t2
                    n += 1
        for e in range(edge_cos.shape[1]):
            ex = edge_cos[ring, e]
            ey = edge_sin[ring, e]
            denom = ex * dy - ey * dx
            numer = ey * p0x - ex * p0y
            # t = numer/denom must land strictly inside (0, 1)
            if denom == 0.0 or numer * denom <= 0.0 or abs(numer) >= abs(denom):
                continue
            t = numer / denom
            px = p0x + t * dx
            py = p0y + t * dy
            if px * ex + py * ey <= 0.0:
                continue
            pr2 = px * px + py * py
            if lo2[ring] <= pr2 <= hi2[ring]:
                ts[n] = t
                n += 1
    if n == 0:
        return 2.0
    for i in range(1, n):
        key = ts[i]
        j = i - 1
        while j >= 0 and ts[j] > key:
            ts[j + 1] = ts[j]
            j -= 1
        ts[j + 1] = key
    lo = 0.0
    for i in range(n + 1):
        hi = ts[i] if i < n else 1.0
        mid = 0.5 * (lo + hi)
        mx = p0x + mid * dx
        my = p0y + mid * dy
        if _point_in_wall(mx, my, lo2, hi2, gate_ux, gate_uy, cos_half):
            return lo
        lo = hi
    return 2.0


@njit(cache=True)
def _update_exit_state(p0x, p0y, p1x, p1y, radius, gate_ux, gate_uy, cos_half,
                       inside, inner_exit, flag):
    """Advance the inner-ring crossing state over one segment.

    Crossings are true sign changes of the radial distance (tangential
    touches are skipped); ``inside`` tracks whether the path currently sits
    inside the ring centerline.
    """
    dx = p1x - p0x
    dy = p1y - p0y
    a = dx * dx + dy * dy
    if a == 0.0:
        return inside, inner_exit, flag
    b = 2.0 * (p0x * dx + p0y * dy)
    c = p0x * p0x + p0y * p0y - radius * radius
    disc = b * b - 4.0 * a * c
    if disc <= 0.0:
        return inside, inner_exit, flag
    sq = math.sqrt(disc)
    for k in range(2):
        t = (-b - sq) / (2.0 * a) if k == 0 else (-b + sq) / (2.0 * a)
        if t <= 0.0 or t > 1.0:
            continue
        px = p0x + t * dx
        py = p0y + t * dy
        deriv = px * dx + py * dy
        if deriv == 0.0:
            continue
        outward = deriv > 0.0
        if outward != inside:
            continue
        inside = not outward
        gate = _in_gate(px, py, math.sqrt(px * px + py * py), 0,
                        gate_ux, gate_uy, cos_half)
        if outward and gate > 0:
            if inner_exit == 0:
                inner_exit = gate
            elif gate != inner_exit:
                flag = True
    return inside, inner_exit, flag


@njit(cache=True)
def evaluate_planners(nodes, radii, h, gate_ux, gate_uy, cos_half, edge_cos, edge_sin,
                      paths, n_points, fitness, inner_exit, flag):
    """Evaluate a batch of node sequences: truncate at walls, classify exits.

    ``nodes`` is (B, K, 2); ``paths`` must be (B, K+1, 2). Outputs are filled
    in place.
    """
    B, K = nodes.shape[0], nodes.shape[1]
    lo2 = np.empty(radii.shape[0], np.float64)
    hi2 = np.empty(radii.shape[0], np.float64)
    for r in range(radii.shape[0]):
        lo2[r] = (radii[r] - h) ** 2
        hi2[r] = (radii[r] + h) ** 2
    ts = np.empty(32, np.float64)
    for b in range(B):
        px = 0.0
        py = 0.0
        paths[b, 0, 0] = 0.0
        paths[b, 0, 1] = 0.0
        fit = 0.0
        ie = 0
        fl = False
        inside = True
        npts = 1
        for i in range(K):
            qx = nodes[b, i, 0]
            qy = nodes[b, i, 1]
            t_hit = _segment_wall_hit(px, py, qx, qy, radii, lo2, hi2,
                                      gate_ux, gate_uy, cos_half, edge_cos, edge_sin, ts)
            t_end = t_hit if t_hit <= 1.0 else 1.0
            ex = px + t_end * (qx - px)
            ey = py + t_end * (qy - py)
            inside, ie, fl = _update_exit_state(px, py, ex, ey, radii[0],
                                                gate_ux, gate_uy, cos_half, inside, ie, fl)
            fit += math.sqrt((ex - px) ** 2 + (ey - py) ** 2)
            paths[b, npts, 0] = ex
            paths[b, npts, 1] = ey
            npts += 1
            px = ex
            py = ey
            if t_hit <= 1.0:
                break
        n_points[b] = npts
        fitness[b] = fit
        inner_exit[b] = ie
        flag[b] = fl


@njit(cache=True)
def simulate_controllers(weights, ni, nh, nc, no, use_bias,
                         radii, h, gate_ux, gate_uy, cos_half, edge_cos, edge_sin,
                         bound, start_x, start_y, psi0, steps,
                         v_max, rot_max, rf_cos, rf_sin, rf_range,
                         paths, headings, fitness, inner_exit, flag):
    """Simulate a batch of recurrent controllers in the maze.

    ``weights`` is (B, W). Per tick: read rangefinders and the home-beacon
    quadrant, run the network, rotate, then translate with a stop at the
    first wall or world-bound contact (backed off a hair so a stopped robot
    can still steer away).
    """
    B = weights.shape[0]
    off_ctx = ni * nh
    off_hc = off_ctx + nc * nh
    off_out = off_hc + nh * nc
    off_bh = off_out + nh * no
    off_bo = off_bh + nh
    n_rf = rf_cos.shape[0]
    lo2 = np.empty(radii.shape[0], np.float64)
    hi2 = np.empty(radii.shape[0], np.float64)
    for r in range(radii.shape[0]):
        lo2[r] = (radii[r] - h) ** 2
        hi2[r] = (radii[r] + h) ** 2
    ts = np.empty(32, np.float64)
    ctx = np.empty(nc, np.float64)
    hid = np.empty(nh, np.float64)
    u = np.empty(ni, np.float64)
    for b in range(B):
        w = weights[b]
        px = start_x
        py = start_y
        psi = psi0[b]
        for j in range(nc):
            ctx[j] = 0.0
        fit = 0.0
        ie = 0
        fl = False
        inside = math.sqrt(px * px + py * py) < radii[0]
        paths[b, 0, 0] = px
        paths[b, 0, 1] = py
        headings[b, 0] = psi
        cpsi = math.cos(psi)
        spsi = math.sin(psi)
        for step in range(steps):
            # rangefinders: normalized distance to the first wall, 1 = clear
            for k in range(n_rf):
                ck = rf_cos[k]
                sk = rf_sin[k]
                dirx = cpsi * ck - spsi * sk
                diry = spsi * ck + cpsi * sk
                t = _segment_wall_hit(px, py, px + rf_range * dirx,
                                      py + rf_range * diry, radii, lo2, hi2,
                                      gate_ux, gate_uy, cos_half, edge_cos, edge_sin, ts)
                u[k] = t if t <= 1.0 else 1.0
            # home beacon: quadrant of the origin-pointing vector, robot frame
            vx = start_x - px
            vy = start_y - py
            bx = cpsi * vx + spsi * vy
            by = -spsi * vx + cpsi * vy
            if bx > 0.0 and by >= 0.0:
                quad = 0
            elif by > 0.0:
                quad = 1
            elif bx < 0.0:
                quad = 2
            elif by < 0.0:
                quad = 3
            else:
                quad = 0
            for k in range(4):
                u[n_rf + k] = 1.0 if k == quad else 0.0
            # forward pass
            for j in range(nh):
                s = 0.0
                for i in range(ni):
                    s += u[i] * w[i * nh + j]
                for i in range(nc):
                    s += ctx[i] * w[off_ctx + i * nh + j]
                if use_bias:
                    s += w[off_bh + j]
                hid[j] = math.tanh(s)
            o_fwd = 0.0
            o_rot = 0.0
            for i in range(nh):
                o_fwd += hid[i] * w[off_out + i * no + 0]
                o_rot += hid[i] * w[off_out + i * no + 1]
            if use_bias:
                o_fwd += w[off_bo + 0]
                o_rot += w[off_bo + 1]
            o_fwd = math.tanh(o_fwd)
            o_rot = math.tanh(o_rot)
            for j in range(nc):
                s = 0.0
                for i in range(nh):
                    s += hid[i] * w[off_hc + i * nc + j]
                ctx[j] = s
            # rotate, then translate along the new heading
            psi = psi + o_rot * rot_max
            cpsi = math.cos(psi)
            spsi = math.sin(psi)
            move = o_fwd * v_max
            qx = px + move * cpsi
            qy = py + move * spsi
            if move != 0.0:
                t_stop = _segment_wall_hit(px, py, qx, qy, radii, lo2, hi2,
                                           gate_ux, gate_uy, cos_half, edge_cos, edge_sin, ts)
                # world bounds act as walls too
                dx = qx - px
                dy = qy - py
                if dx > 0.0:
                    tb = (bound - px) / dx
                    if tb < t_stop:
                        t_stop = tb
                elif dx < 0.0:
                    tb = (-bound - px) / dx
                    if tb < t_stop:
                        t_stop = tb
                if dy > 0.0:
                    tb = (bound - py) / dy
                    if tb < t_stop:
                        t_stop = tb
                elif dy < 0.0:
                    tb = (-bound - py) / dy
                    if tb < t_stop:
                        t_stop = tb
                if t_stop <= 1.0:
                    seg_len = abs(move)
                    t_back = t_stop - 1e-9 / seg_len
                    if t_back < 0.0:
                        t_back = 0.0
                    qx = px + t_back * dx
                    qy = py + t_back * dy
                inside, ie, fl = _update_exit_state(px, py, qx, qy, radii[0],
                                                    gate_ux, gate_uy, cos_half,
                                                    inside, ie, fl)
                fit += math.sqrt((qx - px) ** 2 + (qy - py) ** 2)
                px = qx
                py = qy
            paths[b, step + 1, 0] = px
            paths[b, step + 1, 1] = py
            headings[b, step + 1] = psi
        fitness[b] = fit
        inner_exit[b] = ie
        flag[b] = fl
