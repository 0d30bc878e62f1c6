"""Compiled fast path for the batched physics substep loop.

Mirrors the numpy kernels in arm.py / environment.py with per-lane scalar
loops; lanes are fully independent, so results do not depend on the batch
partitioning. Falls back gracefully when numba is unavailable
(environment.BatchEnv then uses the pure-numpy path).
"""

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def deco(f):
            return f

        return deco


@njit(cache=True)
def _mat33_mul(a, b, out):
    for i in range(3):
        for j in range(3):
            s = 0.0
            for k in range(3):
                s += a[i, k] * b[k, j]
            out[i, j] = s


@njit(cache=True)
def _cross3(a, b, out):
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]


@njit(cache=True)
def step_batch(
    qpos, qvel, qacc, act, applied, dwell, tip_out, completed, diverged,
    tgt_centre, tgt_radius, tgt_dwell, is_button, btn_rot, btn_half, btn_minforce,
    l1, l2, c1off, c2off, m1, m2, limits, damping, gravity, gains,
    tau_act, tau_deact, armature, stiffness, cdamping, n_substeps, dtp, qvel_bound,
):
    nb = qpos.shape[0]
    na = act.shape[1]

    r1 = np.empty((3, 3))
    r2 = np.empty((3, 3))
    r3 = np.empty((3, 3))
    r4 = np.empty((3, 3))
    r12 = np.empty((3, 3))
    rs = np.empty((3, 3))
    rf = np.empty((3, 3))
    a2 = np.empty(3)
    a3 = np.empty(3)
    a4 = np.empty(3)
    elbow = np.empty(3)
    tip = np.empty(3)
    com1 = np.empty(3)
    com2 = np.empty(3)
    j1 = np.empty((3, 4))
    j2 = np.empty((3, 4))
    jt = np.empty((3, 4))
    w = np.empty(3)
    al = np.empty(3)
    w4v = np.empty(3)
    al4 = np.empty(3)
    tmp = np.empty(3)
    tmp2 = np.empty(3)
    tmp3 = np.empty(3)
    ac1 = np.empty(3)
    ac2 = np.empty(3)
    ae = np.empty(3)
    r2v = np.empty(3)
    tipf = np.empty(3)
    mm = np.empty((4, 4))
    rhs = np.empty(4)
    ll = np.empty((4, 4))
    yy = np.empty(4)
    a1 = np.empty(3)
    a1[0] = 0.0
    a1[1] = -1.0
    a1[2] = 0.0

    for b in range(nb):
        if diverged[b]:
            continue
        for _ in range(n_substeps):
            # first-order activation dynamics
            for a in range(na):
                tau = tau_act if applied[b, a] >= act[b, a] else tau_deact
                v = act[b, a] + dtp * (applied[b, a] - act[b, a]) / tau
                if v < 0.0:
                    v = 0.0
                elif v > 1.0:
                    v = 1.0
                act[b, a] = v

            # forward kinematics
            c0, s0 = np.cos(qpos[b, 0]), np.sin(qpos[b, 0])
            c1, s1 = np.cos(qpos[b, 1]), np.sin(qpos[b, 1])
            c2, s2 = np.cos(qpos[b, 2]), np.sin(qpos[b, 2])
            c3, s3 = np.cos(qpos[b, 3]), np.sin(qpos[b, 3])
            r1[0, 0], r1[0, 1], r1[0, 2] = c0, 0.0, -s0
            r1[1, 0], r1[1, 1], r1[1, 2] = 0.0, 1.0, 0.0
            r1[2, 0], r1[2, 1], r1[2, 2] = s0, 0.0, c0
            r2[0, 0], r2[0, 1], r2[0, 2] = 1.0, 0.0, 0.0
            r2[1, 0], r2[1, 1], r2[1, 2] = 0.0, c1, -s1
            r2[2, 0], r2[2, 1], r2[2, 2] = 0.0, s1, c1
            r3[0, 0], r3[0, 1], r3[0, 2] = c2, s2, 0.0
            r3[1, 0], r3[1, 1], r3[1, 2] = -s2, c2, 0.0
            r3[2, 0], r3[2, 1], r3[2, 2] = 0.0, 0.0, 1.0
            r4[0, 0], r4[0, 1], r4[0, 2] = c3, 0.0, -s3
            r4[1, 0], r4[1, 1], r4[1, 2] = 0.0, 1.0, 0.0
            r4[2, 0], r4[2, 1], r4[2, 2] = s3, 0.0, c3
            _mat33_mul(r1, r2, r12)
            _mat33_mul(r12, r3, rs)
            _mat33_mul(rs, r4, rf)
            for i in range(3):
                a2[i] = r1[i, 0]
                a3[i] = -r12[i, 2]
                a4[i] = -rs[i, 1]
                elbow[i] = -l1 * rs[i, 2]
                tip[i] = elbow[i] - l2 * rf[i, 2]
                com1[i] = -c1off * rs[i, 2]
                com2[i] = elbow[i] - c2off * rf[i, 2]

            # positional jacobians
            _cross3(a1, com1, tmp)
            for i in range(3):
                j1[i, 0] = tmp[i]
            _cross3(a2, com1, tmp)
            for i in range(3):
                j1[i, 1] = tmp[i]
            _cross3(a3, com1, tmp)
            for i in range(3):
                j1[i, 2] = tmp[i]
                j1[i, 3] = 0.0
            _cross3(a1, com2, tmp)
            for i in range(3):
                j2[i, 0] = tmp[i]
            _cross3(a2, com2, tmp)
            for i in range(3):
                j2[i, 1] = tmp[i]
            _cross3(a3, com2, tmp)
            for i in range(3):
                j2[i, 2] = tmp[i]
            for i in range(3):
                r2v[i] = com2[i] - elbow[i]
            _cross3(a4, r2v, tmp)
            for i in range(3):
                j2[i, 3] = tmp[i]
            _cross3(a1, tip, tmp)
            for i in range(3):
                jt[i, 0] = tmp[i]
            _cross3(a2, tip, tmp)
            for i in range(3):
                jt[i, 1] = tmp[i]
            _cross3(a3, tip, tmp)
            for i in range(3):
                jt[i, 2] = tmp[i]
            for i in range(3):
                r2v[i] = tip[i] - elbow[i]
            _cross3(a4, r2v, tmp)
            for i in range(3):
                jt[i, 3] = tmp[i]

            # contact force and press detection (current tip, pre-integration)
            for i in range(3):
                tipf[i] = 0.0
            if is_button[b]:
                px = py = pz = 0.0
                vx = vy = vz = 0.0
                for i in range(3):
                    vel_i = 0.0
                    for k in range(4):
                        vel_i += jt[i, k] * qvel[b, k]
                    rel_i = tip[i] - tgt_centre[b, i]
                    px += btn_rot[b, i, 0] * rel_i
                    py += btn_rot[b, i, 1] * rel_i
                    pz += btn_rot[b, i, 2] * rel_i
                    vx += btn_rot[b, i, 0] * vel_i
                    vy += btn_rot[b, i, 1] * vel_i
                    vz += btn_rot[b, i, 2] * vel_i
                hx, hy, hz = btn_half[b, 0], btn_half[b, 1], btn_half[b, 2]
                if abs(px) <= hx and abs(py) <= hy and abs(pz) <= hz:
                    dx, dy, dz = hx - abs(px), hy - abs(py), hz - abs(pz)
                    axis = 0
                    depth = dx
                    if dy < depth:
                        axis, depth = 1, dy
                    if dz < depth:
                        axis, depth = 2, dz
                    if axis == 0:
                        sign = 1.0 if px >= 0 else -1.0
                        approach = -vx * sign
                    elif axis == 1:
                        sign = 1.0 if py >= 0 else -1.0
                        approach = -vy * sign
                    else:
                        sign = 1.0 if pz >= 0 else -1.0
                        approach = -vz * sign
                    force = stiffness * depth - cdamping * approach
                    if force < 0.0:
                        force = 0.0
                    if force >= btn_minforce[b] and not completed[b]:
                        completed[b] = True
                    for i in range(3):
                        tipf[i] = btn_rot[b, i, axis] * sign * force
            else:
                # dwell bookkeeping at substep granularity
                dsq = 0.0
                for i in range(3):
                    d = tip[i] - tgt_centre[b, i]
                    dsq += d * d
                inside = np.sqrt(dsq) <= tgt_radius[b]
                if inside and not completed[b]:
                    dwell[b] = dwell[b] + dtp
                else:
                    dwell[b] = 0.0
                if inside and tgt_dwell[b] <= dwell[b]:
                    completed[b] = True
                if dwell[b] > tgt_dwell[b]:
                    dwell[b] = tgt_dwell[b]

            # velocity-product (bias) accelerations
            for i in range(3):
                w[i] = a1[i] * qvel[b, 0]
                al[i] = 0.0
            _cross3(w, a2, tmp)
            for i in range(3):
                al[i] += tmp[i] * qvel[b, 1]
                w[i] += a2[i] * qvel[b, 1]
            _cross3(w, a3, tmp)
            for i in range(3):
                al[i] += tmp[i] * qvel[b, 2]
                w[i] += a3[i] * qvel[b, 2]
            _cross3(w, a4, tmp)
            for i in range(3):
                al4[i] = al[i] + tmp[i] * qvel[b, 3]
                w4v[i] = w[i] + a4[i] * qvel[b, 3]

            _cross3(al, com1, tmp)
            _cross3(w, com1, tmp2)
            _cross3(w, tmp2, tmp3)
            for i in range(3):
                ac1[i] = tmp[i] + tmp3[i]
            _cross3(al, elbow, tmp)
            _cross3(w, elbow, tmp2)
            _cross3(w, tmp2, tmp3)
            for i in range(3):
                ae[i] = tmp[i] + tmp3[i]
                r2v[i] = com2[i] - elbow[i]
            _cross3(al4, r2v, tmp)
            _cross3(w4v, r2v, tmp2)
            _cross3(w4v, tmp2, tmp3)
            for i in range(3):
                ac2[i] = ae[i] + tmp[i] + tmp3[i]

            # mass matrix and generalized forces
            for k in range(4):
                for l in range(4):
                    s = 0.0
                    for i in range(3):
                        s += m1 * j1[i, k] * j1[i, l] + m2 * j2[i, k] * j2[i, l]
                    mm[k, l] = s
                mm[k, k] += armature
                s = -damping[k] * qvel[b, k]
                for a in range(na):
                    s += gains[k, a] * act[b, a]
                for i in range(3):
                    s -= m1 * j1[i, k] * (ac1[i] - gravity[i])
                    s -= m2 * j2[i, k] * (ac2[i] - gravity[i])
                    s += jt[i, k] * tipf[i]
                rhs[k] = s

            # Cholesky solve (4x4)
            ok = True
            for jj in range(4):
                s = mm[jj, jj]
                for k in range(jj):
                    s -= ll[jj, k] * ll[jj, k]
                if s <= 0.0 or not np.isfinite(s):
                    ok = False
                    break
                ll[jj, jj] = np.sqrt(s)
                for ii in range(jj + 1, 4):
                    s = mm[ii, jj]
                    for k in range(jj):
                        s -= ll[ii, k] * ll[jj, k]
                    ll[ii, jj] = s / ll[jj, jj]
            if not ok:
                diverged[b] = True
                break
            for ii in range(4):
                s = rhs[ii]
                for k in range(ii):
                    s -= ll[ii, k] * yy[k]
                yy[ii] = s / ll[ii, ii]
            for ii in range(3, -1, -1):
                s = yy[ii]
                for k in range(ii + 1, 4):
                    s -= ll[k, ii] * qacc[b, k]
                qacc[b, ii] = s / ll[ii, ii]

            # semi-implicit Euler + joint limits
            bad = False
            for k in range(4):
                qvel[b, k] += dtp * qacc[b, k]
                qpos[b, k] += dtp * qvel[b, k]
                if qpos[b, k] < limits[k, 0]:
                    qpos[b, k] = limits[k, 0]
                    qvel[b, k] = 0.0
                elif qpos[b, k] > limits[k, 1]:
                    qpos[b, k] = limits[k, 1]
                    qvel[b, k] = 0.0
                if not np.isfinite(qvel[b, k]) or abs(qvel[b, k]) > qvel_bound:
                    bad = True
            if bad:
                diverged[b] = True
                for k in range(4):
                    qvel[b, k] = 0.0
                    qacc[b, k] = 0.0
                break

        # final fingertip for this lane
        c0, s0 = np.cos(qpos[b, 0]), np.sin(qpos[b, 0])
        c1, s1 = np.cos(qpos[b, 1]), np.sin(qpos[b, 1])
        c2, s2 = np.cos(qpos[b, 2]), np.sin(qpos[b, 2])
        c3, s3 = np.cos(qpos[b, 3]), np.sin(qpos[b, 3])
        r1[0, 0], r1[0, 1], r1[0, 2] = c0, 0.0, -s0
        r1[1, 0], r1[1, 1], r1[1, 2] = 0.0, 1.0, 0.0
        r1[2, 0], r1[2, 1], r1[2, 2] = s0, 0.0, c0
        r2[0, 0], r2[0, 1], r2[0, 2] = 1.0, 0.0, 0.0
        r2[1, 0], r2[1, 1], r2[1, 2] = 0.0, c1, -s1
        r2[2, 0], r2[2, 1], r2[2, 2] = 0.0, s1, c1
        r3[0, 0], r3[0, 1], r3[0, 2] = c2, s2, 0.0
        r3[1, 0], r3[1, 1], r3[1, 2] = -s2, c2, 0.0
        r3[2, 0], r3[2, 1], r3[2, 2] = 0.0, 0.0, 1.0
        r4[0, 0], r4[0, 1], r4[0, 2] = c3, 0.0, -s3
        r4[1, 0], r4[1, 1], r4[1, 2] = 0.0, 1.0, 0.0
        r4[2, 0], r4[2, 1], r4[2, 2] = s3, 0.0, c3
        _mat33_mul(r1, r2, r12)
        _mat33_mul(r12, r3, rs)
        _mat33_mul(rs, r4, rf)
        for i in range(3):
            tip_out[b, i] = -l1 * rs[i, 2] - l2 * rf[i, 2]
