"""Compiled stepping kernels.

All hot loops live here.  The python-facing functions in ``worlds``, ``core``
and ``policy`` call these same compiled functions, so a single environment
step evaluated from python and the same step inside the batched episode
kernel execute identical machine code.  No ``fastmath``: float operations
keep their written order and are never contracted or reassociated.

World parameters are passed as a packed float64 vector (see ``WP_*``), walls
as an (n, 5) array of ``[ax, ay, bx, by, thickness]`` rows and bounds as
``[xlo, ylo, xhi, yhi]``.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit, prange

from .rng import _GOLDEN_U, _mix64_nb, _uniform_nb

POINTMAZE = 0
ANTMAZE = 1
ANTTRAP = 2

WP_GOAL_X = 0
WP_GOAL_Y = 1
WP_GOAL_RADIUS = 2
WP_MAX_ACCEL = 3
WP_DRAG = 4
WP_CTRL_COST = 5
WP_SURVIVAL = 6
WP_STEP_SIZE = 7
WP_DESC_LO_X = 8
WP_DESC_LO_Y = 9
WP_DESC_HI_X = 10
WP_DESC_HI_Y = 11
WP_CLIP_DESC = 12
WP_EARLY_TERM = 13
WP_HAS_GOAL = 14
WP_SIZE = 15

CONTACT_EPS = 1e-6
# minimum clearance kept between a resting point and a wall surface
CLEARANCE = 1e-12
_NO_HIT = 2.0


@njit(cache=True)
def point_segment_distance(px, py, ax, ay, bx, by):
    ex = bx - ax
    ey = by - ay
    l2 = ex * ex + ey * ey
    u = ((px - ax) * ex + (py - ay) * ey) / l2
    if u < 0.0:
        u = 0.0
    elif u > 1.0:
        u = 1.0
    cx = ax + u * ex - px
    cy = ay + u * ey - py
    return math.sqrt(cx * cx + cy * cy)


@njit(cache=True)
def _disc_entry(px, py, dx, dy, cx, cy, r):
    # first t in [0, 1] where p + t*d enters the closed disc (c, r)
    fx = px - cx
    fy = py - cy
    a = dx * dx + dy * dy
    b = 2.0 * (dx * fx + dy * fy)
    c = fx * fx + fy * fy - r * r
    if c <= 0.0:
        return 0.0 if b < 0.0 else _NO_HIT
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return _NO_HIT
    t = (-b - math.sqrt(disc)) / (2.0 * a)
    if 0.0 <= t <= 1.0:
        return t
    return _NO_HIT


@njit(cache=True)
def capsule_entry(px, py, dx, dy, ax, ay, bx, by, r):
    """First fraction t of the move p -> p + d touching the capsule, or 2.0.

    A point already on the capsule surface only blocks motion pointing
    inwards, so bodies resting against a wall can move away from it.
    """
    ex = bx - ax
    ey = by - ay
    le = math.sqrt(ex * ex + ey * ey)
    nx = -ey / le
    ny = ex / le
    s0 = nx * (px - ax) + ny * (py - ay)
    ds = nx * dx + ny * dy
    best = _NO_HIT
    if abs(s0) <= r:
        u0 = ((px - ax) * ex + (py - ay) * ey) / (le * le)
        if 0.0 <= u0 <= 1.0:
            # inside the slab and within the segment span: on the surface
            if s0 * ds < 0.0 or (s0 == 0.0 and ds != 0.0):
                return 0.0
    elif ds != 0.0:
        side = r if s0 > 0.0 else -r
        t = (side - s0) / ds
        if 0.0 <= t <= 1.0:
            hx = px + t * dx
            hy = py + t * dy
            u = ((hx - ax) * ex + (hy - ay) * ey) / (le * le)
            if 0.0 <= u <= 1.0:
                best = t
    t = _disc_entry(px, py, dx, dy, ax, ay, r)
    if t < best:
        best = t
    t = _disc_entry(px, py, dx, dy, bx, by, r)
    if t < best:
        best = t
    return best


@njit(cache=True)
def min_wall_clearance(px, py, walls):
    """Smallest (distance - radius) over all walls; +inf with no walls."""
    best = np.inf
    for k in range(walls.shape[0]):
        d = point_segment_distance(
            px, py, walls[k, 0], walls[k, 1], walls[k, 2], walls[k, 3]
        ) - 0.5 * walls[k, 4]
        if d < best:
            best = d
    return best


@njit(cache=True)
def wall_clip_nb(px, py, qx, qy, walls, bounds):
    """Move from p toward q, stopping just before the first wall contact.

    Returns ``(x, y, contact)``; contact is set when a wall or the bounds
    shortened the move.
    """
    contact = False
    cx = min(max(qx, bounds[0]), bounds[2])
    cy = min(max(qy, bounds[1]), bounds[3])
    if cx != qx or cy != qy:
        contact = True
    dx = cx - px
    dy = cy - py
    length = math.sqrt(dx * dx + dy * dy)
    if length == 0.0:
        return px, py, contact
    tmin = _NO_HIT
    for k in range(walls.shape[0]):
        t = capsule_entry(
            px, py, dx, dy,
            walls[k, 0], walls[k, 1], walls[k, 2], walls[k, 3], 0.5 * walls[k, 4],
        )
        if t < tmin:
            tmin = t
    if tmin > 1.0:
        return cx, cy, contact
    s = (tmin * length - CONTACT_EPS) / length
    if s < 0.0:
        s = 0.0
    x = px + s * dx
    y = py + s * dy
    # grazing contacts can leave less clearance than eps along the path
    for _ in range(60):
        if s == 0.0 or min_wall_clearance(x, y, walls) >= CLEARANCE:
            break
        s *= 0.5
        x = px + s * dx
        y = py + s * dy
    if s == 0.0:
        x = px
        y = py
    return x, y, True


@njit(cache=True)
def _clip1(a):
    if a > 1.0:
        return 1.0
    if a < -1.0:
        return -1.0
    return a


@njit(cache=True)
def env_step_nb(code, wp, walls, bounds, px, py, vx, vy, action):
    """One world transition on a clipped action.

    Returns ``(px, py, vx, vy, reward, reached)``.
    """
    a0 = _clip1(action[0])
    a1 = _clip1(action[1])
    gx = wp[WP_GOAL_X]
    gy = wp[WP_GOAL_Y]
    if code == POINTMAZE:
        step = wp[WP_STEP_SIZE]
        nx, ny, _ = wall_clip_nb(px, py, px + step * a0, py + step * a1, walls, bounds)
        ddx = nx - gx
        ddy = ny - gy
        dist = math.sqrt(ddx * ddx + ddy * ddy)
        reached = wp[WP_EARLY_TERM] != 0.0 and dist < wp[WP_GOAL_RADIUS]
        return nx, ny, 0.0, 0.0, -dist, reached

    keep = 1.0 - wp[WP_DRAG]
    acc = wp[WP_MAX_ACCEL]
    nvx = keep * vx + acc * a0
    nvy = keep * vy + acc * a1
    nx, ny, contact = wall_clip_nb(px, py, px + nvx, py + nvy, walls, bounds)
    if contact:
        nvx = 0.0
        nvy = 0.0
    if code == ANTMAZE:
        ddx = nx - gx
        ddy = ny - gy
        dist = math.sqrt(ddx * ddx + ddy * ddy)
        reached = wp[WP_EARLY_TERM] != 0.0 and dist < wp[WP_GOAL_RADIUS]
        return nx, ny, nvx, nvy, -dist, reached
    sq = 0.0
    for j in range(action.shape[0]):
        aj = _clip1(action[j])
        sq += aj * aj
    reward = nvx - wp[WP_CTRL_COST] * sq + wp[WP_SURVIVAL]
    return nx, ny, nvx, nvy, reward, False


@njit(cache=True)
def observe_nb(code, wp, px, py, vx, vy, out):
    out[0] = px
    out[1] = py
    if code == POINTMAZE:
        return
    out[2] = vx
    out[3] = vy
    if wp[WP_HAS_GOAL] != 0.0:
        out[4] = wp[WP_GOAL_X] - px
        out[5] = wp[WP_GOAL_Y] - py
    else:
        out[4] = 0.0
        out[5] = 0.0
    for i in range(6, out.shape[0]):
        out[i] = 0.0


@njit(cache=True)
def descriptor_nb(wp, px, py):
    if wp[WP_CLIP_DESC] != 0.0:
        px = min(max(px, wp[WP_DESC_LO_X]), wp[WP_DESC_HI_X])
        py = min(max(py, wp[WP_DESC_LO_Y]), wp[WP_DESC_HI_Y])
    return px, py


@njit(cache=True)
def forward_nb(params, sizes, obs, out, buf_a, buf_b):
    """tanh MLP; weights (in, out) row-major then bias, layer by layer.

    Each pre-activation is accumulated over inputs in index order, then the
    bias is added, then tanh.
    """
    n_layers = sizes.shape[0] - 1
    cur = buf_a
    nxt = buf_b
    for i in range(sizes[0]):
        cur[i] = obs[i]
    off = 0
    for layer in range(n_layers):
        n_in = sizes[layer]
        n_out = sizes[layer + 1]
        b_off = off + n_in * n_out
        for o in range(n_out):
            nxt[o] = 0.0
        acc = nxt[:n_out]
        i = 0
        # four inputs per sweep; each acc[o] still sums in input order
        while i + 4 <= n_in:
            x0 = cur[i]
            x1 = cur[i + 1]
            x2 = cur[i + 2]
            x3 = cur[i + 3]
            w0 = params[off + i * n_out: off + (i + 1) * n_out]
            w1 = params[off + (i + 1) * n_out: off + (i + 2) * n_out]
            w2 = params[off + (i + 2) * n_out: off + (i + 3) * n_out]
            w3 = params[off + (i + 3) * n_out: off + (i + 4) * n_out]
            for o in range(n_out):
                acc[o] = (((acc[o] + x0 * w0[o]) + x1 * w1[o]) + x2 * w2[o]) + x3 * w3[o]
            i += 4
        while i < n_in:
            xi = cur[i]
            w = params[off + i * n_out: off + (i + 1) * n_out]
            for o in range(n_out):
                acc[o] += xi * w[o]
            i += 1
        for o in range(n_out):
            nxt[o] = math.tanh(nxt[o] + params[b_off + o])
        off = b_off + n_out
        tmp = cur
        cur = nxt
        nxt = tmp
    for o in range(sizes[n_layers]):
        out[o] = cur[o]


@njit(cache=True)
def episode_key_nb(key, episode):
    return _mix64_nb(key ^ _mix64_nb(np.uint64(episode) + _GOLDEN_U))


@njit(cache=True)
def policy_env_step_nb(code, wp, walls, bounds, params, sizes, use_random, ep_key,
                       step_index, px, py, vx, vy, obs, act, buf_a, buf_b):
    """Policy action plus world transition for one environment.

    This is the unit of work shared by the episode kernel and the batched
    tick kernel.
    """
    if use_random:
        for j in range(act.shape[0]):
            act[j] = 2.0 * _uniform_nb(ep_key, step_index, j) - 1.0
    else:
        observe_nb(code, wp, px, py, vx, vy, obs)
        forward_nb(params, sizes, obs, act, buf_a, buf_b)
    return env_step_nb(code, wp, walls, bounds, px, py, vx, vy, act)


@njit(cache=True)
def run_episode_nb(code, wp, walls, bounds, max_steps, sx, sy, params, sizes,
                   use_random, ep_key, obs, act, buf_a, buf_b):
    px = sx
    py = sy
    vx = 0.0
    vy = 0.0
    fitness = 0.0
    steps = 0
    reached = False
    while steps < max_steps:
        px, py, vx, vy, reward, reached = policy_env_step_nb(
            code, wp, walls, bounds, params, sizes, use_random, ep_key,
            steps, px, py, vx, vy, obs, act, buf_a, buf_b,
        )
        fitness += reward
        steps += 1
        if reached:
            break
    bx, by = descriptor_nb(wp, px, py)
    return fitness, bx, by, steps, reached and steps < max_steps


@njit(cache=True)
def rollout_one_nb(code, wp, walls, bounds, max_steps, sx, sy, params, sizes,
                   obs_dim, action_dim, key, use_random):
    width = 0
    for s in sizes:
        if s > width:
            width = s
    return run_episode_nb(
        code, wp, walls, bounds, max_steps, sx, sy, params, sizes, use_random,
        episode_key_nb(key, 0), np.zeros(obs_dim), np.zeros(action_dim),
        np.empty(width), np.empty(width),
    )


@njit(parallel=True, cache=True)
def rollout_batch_nb(code, wp, walls, bounds, max_steps, sx, sy, params2d, gidx,
                     sizes, obs_dim, action_dim, keys, use_random,
                     out_fit, out_bd, out_steps, out_early):
    width = 0
    for s in sizes:
        if s > width:
            width = s
    for b in prange(gidx.shape[0]):
        obs = np.zeros(obs_dim)
        act = np.zeros(action_dim)
        buf_a = np.empty(width)
        buf_b = np.empty(width)
        ep_key = episode_key_nb(keys[b], 0)
        f, bx, by, n, early = run_episode_nb(
            code, wp, walls, bounds, max_steps, sx, sy, params2d[gidx[b]],
            sizes, use_random, ep_key, obs, act, buf_a, buf_b,
        )
        out_fit[b] = f
        out_bd[b, 0] = bx
        out_bd[b, 1] = by
        out_steps[b] = n
        out_early[b] = early


@njit(parallel=True, cache=True)
def tick_nb(code, wp, walls, bounds, max_steps, sx, sy, params2d, gidx, sizes,
            obs_dim, action_dim, keys, use_random, autoreset,
            pos, vel, steps, done, fitness, episodes):
    """Advance every environment of a batch by one step.

    Finished environments are reset in place first when ``autoreset`` is set,
    otherwise they are skipped (absorbing).
    """
    width = 0
    for s in sizes:
        if s > width:
            width = s
    for b in prange(gidx.shape[0]):
        if done[b]:
            if not autoreset:
                continue
            pos[b, 0] = sx
            pos[b, 1] = sy
            vel[b, 0] = 0.0
            vel[b, 1] = 0.0
            steps[b] = 0
            fitness[b] = 0.0
            done[b] = False
            episodes[b] += 1
        obs = np.zeros(obs_dim)
        act = np.zeros(action_dim)
        buf_a = np.empty(width)
        buf_b = np.empty(width)
        ep_key = episode_key_nb(keys[b], episodes[b])
        px, py, vx, vy, reward, reached = policy_env_step_nb(
            code, wp, walls, bounds, params2d[gidx[b]], sizes, use_random, ep_key,
            steps[b], pos[b, 0], pos[b, 1], vel[b, 0], vel[b, 1],
            obs, act, buf_a, buf_b,
        )
        pos[b, 0] = px
        pos[b, 1] = py
        vel[b, 0] = vx
        vel[b, 1] = vy
        fitness[b] += reward
        steps[b] += 1
        if reached or steps[b] >= max_steps:
            done[b] = True
