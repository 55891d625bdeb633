"""Scalar numeric kernels for the 1 kHz inner loop.

Everything here operates on plain float64 arrays so it can be JIT-compiled
with numba. The public modules (oscillators, kinematics, dynamics, env) wrap
these functions; the fused `control_cycle` driver calls the same functions,
so there is exactly one implementation of each piece of math.

If numba is unavailable the decorators become pass-throughs and the kernels
run as ordinary (slow) Python.
"""

import math

import numpy as np

try:
    from numba import njit

    NUMBA_ENABLED = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    NUMBA_ENABLED = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(fn):
            return fn

        return wrap


TWO_PI = 2.0 * math.pi

# Physics parameter vector layout (single float64 array keeps the jitted
# signatures short and the dispatch cache stable).
P_DT = 0          # physics / oscillator substep (s)
P_ALPHA = 1       # oscillator convergence factor (1/s)
P_OMEGA_SCALE = 2  # theta_dot = OMEGA_SCALE * omega (2*pi for cycles/s, 1 for rad/s)
P_LSTEP = 3       # half step length scale (m)
P_H = 4           # nominal leg length (m)
P_CLRNC = 5       # max swing clearance (m)
P_PNTR = 6        # max stance penetration (m)
P_OSCX = 7        # 1.0 if the oscillatory x-term feeds the foot targets
P_OSCZ = 8        # 1.0 if the oscillatory z-term feeds the foot targets
P_L1 = 9          # thigh length (m)
P_L2 = 10         # shank length (m)
P_IK_EPS = 11     # workspace clamp margin (m)
P_KP = 12         # joint PD gains
P_KD = 13
P_TAULIM = 14     # torque limit (N*m)
P_MB = 15         # base mass (kg)
P_IB = 16         # base pitch inertia (kg*m^2)
P_M1 = 17         # thigh mass
P_I1 = 18         # thigh inertia about COM
P_C1 = 19         # thigh COM distance from hip
P_M2 = 20         # shank mass
P_I2 = 21         # shank inertia about COM
P_C2 = 22         # shank COM distance from knee
P_G = 23          # gravity (m/s^2, positive down)
P_KN = 24         # contact normal stiffness (N/m)
P_DN = 25         # contact normal damping (N*s/m)
P_KT = 26         # tangential stiffness (N/m)
P_DTAN = 27       # tangential damping (N*s/m)
P_MUF = 28        # Coulomb friction coefficient
P_GAP_FLOOR = 29  # ground height inside a gap (m)
P_SIZE = 30

NQ = 11  # generalized coordinates: x, z, pitch, then (hip, knee) x 4 legs


@njit(cache=True)
def rg_substep(r, rdot, theta, theta_dot, mu, omega, w, phi, alpha, omega_scale, dt):
    """One semi-implicit Euler substep of the amplitude/phase oscillator bank.

    Amplitude: rddot = alpha*(alpha/4*(mu - r) - rdot), integrated
    velocity-first. Phase rate: theta_dot = omega_scale*omega +
    sum_j r_j*w[i,j]*sin(theta_j - theta_i - phi[i,j]), evaluated with the
    updated amplitudes and the pre-step phases, then theta advances and wraps
    to [0, 2*pi). Arrays are updated in place.
    """
    n = r.shape[0]
    for i in range(n):
        rddot = alpha * (0.25 * alpha * (mu[i] - r[i]) - rdot[i])
        rdot[i] += rddot * dt
        r[i] += rdot[i] * dt
        if r[i] < 0.0:
            r[i] = 0.0
    for i in range(n):
        rate = omega_scale * omega[i]
        for j in range(n):
            wij = w[i, j]
            if wij != 0.0:
                rate += r[j] * wij * math.sin(theta[j] - theta[i] - phi[i, j])
        theta_dot[i] = rate
    for i in range(n):
        theta[i] = (theta[i] + theta_dot[i] * dt) % TWO_PI


@njit(cache=True)
def rg_rates(r, rdot, theta, mu, omega, w, phi, alpha, omega_scale, out):
    """Time derivatives (rdot, rddot, theta_dot) of the oscillator bank.

    Used by the RK4 validation integrator. `out` is (3, n).
    """
    n = r.shape[0]
    for i in range(n):
        out[0, i] = rdot[i]
        out[1, i] = alpha * (0.25 * alpha * (mu[i] - r[i]) - rdot[i])
        rate = omega_scale * omega[i]
        for j in range(n):
            wij = w[i, j]
            if wij != 0.0:
                rate += r[j] * wij * math.sin(theta[j] - theta[i] - phi[i, j])
        out[2, i] = rate


@njit(cache=True)
def pf_targets(r, theta, x_off, z_off, l_step, h, l_clrnc, l_pntr,
               osc_x, osc_z, out_x, out_z):
    """Foot targets in each hip frame from oscillator state plus offsets.

    x = x_off - l_step*r*cos(theta); z = z_off - h + L*sin(theta) with
    L = l_clrnc when sin(theta) > 0 (swing) else l_pntr (stance). The
    osc_x/osc_z gates drop the oscillatory term of the respective axis
    (action-space cases where the rhythm drives one axis only).
    """
    for i in range(r.shape[0]):
        if osc_x:
            out_x[i] = x_off[i] - l_step * r[i] * math.cos(theta[i])
        else:
            out_x[i] = x_off[i]
        if osc_z:
            s = math.sin(theta[i])
            if s > 0.0:
                out_z[i] = z_off[i] - h + l_clrnc * s
            else:
                out_z[i] = z_off[i] - h + l_pntr * s
        else:
            out_z[i] = z_off[i] - h
    return out_x, out_z


@njit(cache=True)
def leg_ik(x, z, l1, l2, eps):
    """Closed-form 2-link IK, knee-bent-backward branch.

    Targets outside the reachable annulus [|l1-l2|+eps, l1+l2-eps] are
    radially clamped to the nearest reachable point before solving.
    Returns (hip, knee) with knee in [-pi, 0].
    """
    d = math.sqrt(x * x + z * z)
    d_min = abs(l1 - l2) + eps
    d_max = l1 + l2 - eps
    if d < 1e-12:
        x = 0.0
        z = -d_min
        d = d_min
    elif d > d_max:
        s = d_max / d
        x *= s
        z *= s
        d = d_max
    elif d < d_min:
        s = d_min / d
        x *= s
        z *= s
        d = d_min
    ck = (d * d - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)
    if ck > 1.0:
        ck = 1.0
    elif ck < -1.0:
        ck = -1.0
    knee = -math.acos(ck)
    hip = math.atan2(x, -z) - math.atan2(l2 * math.sin(knee), l1 + l2 * math.cos(knee))
    return hip, knee


@njit(cache=True)
def leg_fk(hip, knee, l1, l2):
    """Planar 2-link forward kinematics in the hip frame (x forward, z up)."""
    a2 = hip + knee
    x = l1 * math.sin(hip) + l2 * math.sin(a2)
    z = -l1 * math.cos(hip) - l2 * math.cos(a2)
    return x, z


@njit(cache=True)
def pd_tau(q_des, q, qd, kp, kd, lim, out):
    """tau = Kp*(q_des - q) - Kd*qd, clamped to +-lim."""
    for j in range(q.shape[0]):
        t = kp * (q_des[j] - q[j]) - kd * qd[j]
        if t > lim:
            t = lim
        elif t < -lim:
            t = -lim
        out[j] = t
    return out


@njit(cache=True)
def ground_height(x, gap_edges, gap_floor):
    """Terrain height under x: 0 on a platform, gap_floor inside a gap.

    gap_edges is the flat sorted array [s0, e0, s1, e1, ...]; gaps are the
    half-open intervals [s, e).
    """
    idx = np.searchsorted(gap_edges, x, side='right')
    if idx % 2 == 1:
        return gap_floor
    return 0.0


@njit(cache=True)
def spd_solve(M, b):
    """Solve M x = b for symmetric positive definite M (in-place Cholesky)."""
    n = M.shape[0]
    L = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1):
            s = M[i, j]
            for k in range(j):
                s -= L[i, k] * L[j, k]
            if i == j:
                L[i, i] = math.sqrt(s)
            else:
                L[i, j] = s / L[j, j]
    y = np.zeros(n)
    for i in range(n):
        s = b[i]
        for k in range(i):
            s -= L[i, k] * y[k]
        y[i] = s / L[i, i]
    x = np.zeros(n)
    for i in range(n - 1, -1, -1):
        s = y[i]
        for k in range(i + 1, n):
            s -= L[k, i] * x[k]
        x[i] = s / L[i, i]
    return x


@njit(cache=True)
def mass_matrix_const(P):
    """Configuration-independent part of the mass matrix (angular inertias)."""
    M = np.zeros((NQ, NQ))
    M[2, 2] = P[P_IB]
    for leg in range(4):
        ih = 3 + 2 * leg
        ik = 4 + 2 * leg
        i1 = P[P_I1]
        i2 = P[P_I2]
        # thigh angular velocity = pitch_dot + hip_dot
        M[2, 2] += i1 + i2
        M[2, ih] += i1 + i2
        M[ih, 2] += i1 + i2
        M[ih, ih] += i1 + i2
        # shank adds knee_dot
        M[2, ik] += i2
        M[ik, 2] += i2
        M[ih, ik] += i2
        M[ik, ih] += i2
        M[ik, ik] += i2
    return M


@njit(cache=True)
def dyn_step(q, qd, tau, hip_x, gap_edges, P, M_ang, contact, anchor,
             foot_pos, foot_vel, f_normal, f_tangent):
    """One semi-implicit Euler step of the planar articulated dynamics.

    State layout: q = [x, z, pitch, hip0, knee0, ..., hip3, knee3]. Legs hang
    from hips at base-frame offsets (hip_x[i], 0); link angles are measured
    from straight down, positive swinging forward. Ground contact applies a
    clamped spring-damper normal force plus anchored Coulomb friction at
    each point foot. All output arrays are written in place; q/qd advance in
    place. Returns 0 on success, 1 if the new state is non-finite.
    """
    dt = P[P_DT]
    g0 = P[P_G]
    l1 = P[P_L1]
    l2 = P[P_L2]
    m1 = P[P_M1]
    m2 = P[P_M2]
    c1 = P[P_C1]
    c2 = P[P_C2]

    M = M_ang.copy()
    rhs = np.zeros(NQ)

    # base
    mb = P[P_MB]
    M[0, 0] += mb
    M[1, 1] += mb
    rhs[1] -= mb * g0
    for j in range(8):
        rhs[3 + j] += tau[j]

    xb = q[0]
    zb = q[1]
    pitch = q[2]
    phid = qd[2]
    cp = math.cos(pitch)
    sp = math.sin(pitch)

    for leg in range(4):
        ih = 3 + 2 * leg
        ik = 4 + 2 * leg
        ux = cp * hip_x[leg]
        uz = sp * hip_x[leg]
        a1 = pitch + q[ih]
        a2 = a1 + q[ik]
        ad1 = phid + qd[ih]
        ad2 = ad1 + qd[ik]
        e1x = math.sin(a1)
        e1z = -math.cos(a1)
        f1x = -e1z  # cos(a1)
        f1z = e1x   # sin(a1)
        e2x = math.sin(a2)
        e2z = -math.cos(a2)
        f2x = -e2z
        f2z = e2x

        # COM jacobian columns (x and z columns are the identity)
        tpx = -uz + c1 * f1x   # thigh, pitch column
        tpz = ux + c1 * f1z
        thx = c1 * f1x         # thigh, hip column
        thz = c1 * f1z
        shx = l1 * f1x + c2 * f2x  # shank, hip column
        shz = l1 * f1z + c2 * f2z
        spx = -uz + shx        # shank, pitch column
        spz = ux + shz
        skx = c2 * f2x         # shank, knee column
        skz = c2 * f2z

        mle = m1 + m2
        M[0, 0] += mle
        M[1, 1] += mle
        M[0, 2] += m1 * tpx + m2 * spx
        M[1, 2] += m1 * tpz + m2 * spz
        M[0, ih] += m1 * thx + m2 * shx
        M[1, ih] += m1 * thz + m2 * shz
        M[0, ik] += m2 * skx
        M[1, ik] += m2 * skz
        M[2, 2] += m1 * (tpx * tpx + tpz * tpz) + m2 * (spx * spx + spz * spz)
        M[2, ih] += m1 * (tpx * thx + tpz * thz) + m2 * (spx * shx + spz * shz)
        M[2, ik] += m2 * (spx * skx + spz * skz)
        M[ih, ih] += m1 * (thx * thx + thz * thz) + m2 * (shx * shx + shz * shz)
        M[ih, ik] += m2 * (shx * skx + shz * skz)
        M[ik, ik] += m2 * (skx * skx + skz * skz)

        # gravity
        rhs[1] -= mle * g0
        rhs[2] -= g0 * (m1 * tpz + m2 * spz)
        rhs[ih] -= g0 * (m1 * thz + m2 * shz)
        rhs[ik] -= g0 * (m2 * skz)

        # velocity-product (Coriolis/centrifugal) bias accelerations of the COMs
        b1x = -phid * phid * ux - c1 * ad1 * ad1 * e1x
        b1z = -phid * phid * uz - c1 * ad1 * ad1 * e1z
        b2x = -phid * phid * ux - l1 * ad1 * ad1 * e1x - c2 * ad2 * ad2 * e2x
        b2z = -phid * phid * uz - l1 * ad1 * ad1 * e1z - c2 * ad2 * ad2 * e2z
        rhs[0] -= m1 * b1x + m2 * b2x
        rhs[1] -= m1 * b1z + m2 * b2z
        rhs[2] -= m1 * (tpx * b1x + tpz * b1z) + m2 * (spx * b2x + spz * b2z)
        rhs[ih] -= m1 * (thx * b1x + thz * b1z) + m2 * (shx * b2x + shz * b2z)
        rhs[ik] -= m2 * (skx * b2x + skz * b2z)

        # foot point: position, velocity, contact
        fpx = xb + ux + l1 * e1x + l2 * e2x
        fpz = zb + uz + l1 * e1z + l2 * e2z
        gfx = l1 * f1x + l2 * f2x  # foot jacobian, hip column
        gfz = l1 * f1z + l2 * f2z
        gpx = -uz + gfx            # foot jacobian, pitch column
        gpz = ux + gfz
        gkx = l2 * f2x             # foot jacobian, knee column
        gkz = l2 * f2z
        fvx = qd[0] + phid * (-uz) + ad1 * l1 * f1x + ad2 * l2 * f2x
        fvz = qd[1] + phid * ux + ad1 * l1 * f1z + ad2 * l2 * f2z
        foot_pos[leg, 0] = fpx
        foot_pos[leg, 1] = fpz
        foot_vel[leg, 0] = fvx
        foot_vel[leg, 1] = fvz

        hg = ground_height(fpx, gap_edges, P[P_GAP_FLOOR])
        pen = hg - fpz
        fn = 0.0
        ft = 0.0
        if pen > 0.0:
            fn = P[P_KN] * pen - P[P_DN] * fvz
            if fn < 0.0:
                fn = 0.0
        if fn > 0.0:
            if not contact[leg]:
                anchor[leg] = fpx  # touchdown: plant the friction anchor
            ft = -P[P_KT] * (fpx - anchor[leg]) - P[P_DTAN] * fvx
            lim = P[P_MUF] * fn
            if ft > lim:
                ft = lim
                anchor[leg] = fpx + (ft + P[P_DTAN] * fvx) / P[P_KT]
            elif ft < -lim:
                ft = -lim
                anchor[leg] = fpx + (ft + P[P_DTAN] * fvx) / P[P_KT]
            contact[leg] = True
        else:
            contact[leg] = False
        f_normal[leg] = fn
        f_tangent[leg] = ft
        rhs[0] += ft
        rhs[1] += fn
        rhs[2] += gpx * ft + gpz * fn
        rhs[ih] += gfx * ft + gfz * fn
        rhs[ik] += gkx * ft + gkz * fn

    # mirror the upper triangle
    for i in range(NQ):
        for j in range(i + 1, NQ):
            M[j, i] = M[i, j]

    qdd = spd_solve(M, rhs)
    ok = True
    for i in range(NQ):
        qd[i] += qdd[i] * dt
        q[i] += qd[i] * dt
        if not (math.isfinite(q[i]) and math.isfinite(qd[i])):
            ok = False
    return 0 if ok else 1


@njit(cache=True)
def control_cycle(n_sub, q, qd, r, rdot, theta, theta_dot,
                  mu, omega, x_off, z_off, w, phi,
                  hip_x, gap_edges, P, M_ang, jlim_lo, jlim_hi,
                  contact, anchor, foot_pos, foot_vel, f_normal, f_tangent,
                  tau_last, in_gap, max_contact_x):
    """Run one 100 Hz control cycle: n_sub substeps of RG -> PF -> IK -> PD
    -> dynamics with the supraspinal drive held constant.

    Accumulates |tau . qd|*dt (mechanical work proxy for CoT), per-foot
    any-substep in-gap flags, and per-foot maximum ground-contact x (for
    gap-cross detection). Returns (fault, energy).
    """
    dt = P[P_DT]
    tx = np.empty(4)
    tz = np.empty(4)
    q_des = np.empty(8)
    energy = 0.0
    for leg in range(4):
        in_gap[leg] = False
        max_contact_x[leg] = -1e18
    fault = 0
    for _ in range(n_sub):
        rg_substep(r, rdot, theta, theta_dot, mu, omega, w, phi,
                   P[P_ALPHA], P[P_OMEGA_SCALE], dt)
        pf_targets(r, theta, x_off, z_off, P[P_LSTEP], P[P_H],
                   P[P_CLRNC], P[P_PNTR], P[P_OSCX] > 0.5, P[P_OSCZ] > 0.5,
                   tx, tz)
        for leg in range(4):
            hip, knee = leg_ik(tx[leg], tz[leg], P[P_L1], P[P_L2], P[P_IK_EPS])
            jh = 2 * leg
            jk = 2 * leg + 1
            q_des[jh] = min(max(hip, jlim_lo[jh]), jlim_hi[jh])
            q_des[jk] = min(max(knee, jlim_lo[jk]), jlim_hi[jk])
        pd_tau(q_des, q[3:], qd[3:], P[P_KP], P[P_KD], P[P_TAULIM], tau_last)
        for j in range(8):
            energy += abs(tau_last[j] * qd[3 + j]) * dt
        fault = dyn_step(q, qd, tau_last, hip_x, gap_edges, P, M_ang,
                         contact, anchor, foot_pos, foot_vel,
                         f_normal, f_tangent)
        if fault != 0:
            return fault, energy
        for leg in range(4):
            fx = foot_pos[leg, 0]
            if contact[leg] and fx > max_contact_x[leg]:
                max_contact_x[leg] = fx
            if foot_pos[leg, 1] < 0.0:
                idx = np.searchsorted(gap_edges, fx, side='right')
                if idx % 2 == 1:
                    in_gap[leg] = True
    return fault, energy
