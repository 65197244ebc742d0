"""Reference implementations kept independent of the package code paths."""

import math

import numpy as np


def kalman_textbook(A, B, C, Q, R, x, P, u, y):
    """Predict then update with the short-form covariance ``(I - K C) P``."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    C = np.asarray(C, dtype=float).reshape(1, n)
    B = np.asarray(B, dtype=float).reshape(n, 1)
    x = np.asarray(x, dtype=float).reshape(n, 1)
    x_prior = A.dot(x) + B * u
    P_prior = A.dot(P).dot(A.T) + Q
    S = C.dot(P_prior).dot(C.T) + R
    K = P_prior.dot(C.T).dot(np.linalg.inv(S))
    x_post = x_prior + K * (y - C.dot(x_prior))
    P_post = (np.eye(n) - K.dot(C)).dot(P_prior)
    return x_prior.ravel(), P_prior, x_post.ravel(), P_post, K.ravel()


def retrospective_batch(model, z, u_hat, kalman_gains, n_e, n_f, R_z, R_d, R_theta, theta0=None, sign=1.0):
    """Minimizer of the accumulated retrospective cost after every step.

    Rebuilds regressors, filter weights and filtered signals from the raw
    residual, input-estimate and Kalman-gain sequences, then solves the
    normal equations of

        sum_i R_z (z_i - u_f,i + Phi_f,i theta)^2 + R_d (Phi_i theta)^2
            + (theta - theta0)' R_theta (theta - theta0)

    Row ``k`` of the result is the minimizer using steps ``0..k``.
    """
    A, B, C = np.asarray(model.A), np.asarray(model.B), np.asarray(model.C)
    n = A.shape[0]
    steps = len(z)
    l = 2 * n_e + 1
    theta0 = np.zeros(l) if theta0 is None else np.asarray(theta0, dtype=float)

    def at(seq, i):
        return seq[i] if i >= 0 else 0.0

    phis = []
    for i in range(steps):
        row = [at(u_hat, i - j) for j in range(1, n_e + 1)]
        row += [z[i]]
        row += [at(z, i - j) for j in range(1, n_e + 1)]
        phis.append(np.array(row))

    def abar(t):
        K_da = -np.asarray(kalman_gains[t], dtype=float)
        return A.dot(np.eye(n) + sign * np.outer(K_da, C))

    M = R_theta * np.eye(l)
    rhs = R_theta * theta0
    out = np.empty((steps, l))
    for i in range(steps):
        phi_f = np.zeros(l)
        u_f = 0.0
        for j in range(1, n_f + 1):
            if j > i:
                break
            prod = np.eye(n)
            for m in range(1, j):
                prod = prod.dot(abar(i - m))
            h = float(C.dot(prod).dot(B))
            phi_f += h * phis[i - j]
            u_f += h * u_hat[i - j]
        M += R_z * np.outer(phi_f, phi_f) + R_d * np.outer(phis[i], phis[i])
        rhs -= R_z * phi_f * (z[i] - u_f)
        out[i] = np.linalg.solve(M, rhs)
    return out


def circle_radius(ds, dtheta):
    """Radius of the circle whose chords of length ``ds`` subtend ``dtheta``."""
    return ds / (2.0 * math.sin(abs(dtheta) / 2.0))
