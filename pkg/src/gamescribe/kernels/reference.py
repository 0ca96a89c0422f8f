"""Recurrent-cell kernels, pure numpy.

These are the hot inner loops of training and decoding: one fused function
per cell direction, written so that numba can compile the identical bodies
(see kernels.jit).  Weight layout and gate conventions:

  GRU  input weights wx (3H, D), hidden weights wh (3H, H), bias b (3H,),
       gate rows packed [reset; update; candidate].  The candidate input is
       u_c @ (reset * h), and the new state is (1-update)*h + update*cand.
  LSTM weights wx (4H, D), wh (4H, H), b (4H,), rows [input; forget;
       candidate; output]; new_cell = forget*cell + input*cand,
       new_state = output * tanh(new_cell).

All arrays are C-contiguous float64 (or float32) vectors/matrices.
"""

import numpy as np


def sigmoid(x):
    # exp(-logaddexp(0, -x)) is monotone-stable for large |x|.
    return np.exp(-np.logaddexp(0.0, -x))


def gru_forward(x, h, wx, wh, b):
    hidden = h.shape[0]
    ax = wx @ x + b
    ah = wh[: 2 * hidden] @ h
    reset = np.exp(-np.logaddexp(0.0, -(ax[:hidden] + ah[:hidden])))
    update = np.exp(-np.logaddexp(0.0, -(ax[hidden : 2 * hidden] + ah[hidden : 2 * hidden])))
    gated = reset * h
    cand = np.tanh(ax[2 * hidden :] + wh[2 * hidden :] @ gated)
    h_new = (1.0 - update) * h + update * cand
    return h_new, reset, update, cand, gated


def gru_backward(gout, x, h, wx, wh, reset, update, cand, gated):
    hidden = h.shape[0]
    d_cand = gout * update
    d_update = gout * (cand - h)
    dh = gout * (1.0 - update)

    da_c = d_cand * (1.0 - cand * cand)
    d_gated = wh[2 * hidden :].T @ da_c
    d_reset = d_gated * h
    dh = dh + d_gated * reset
    da_u = d_update * update * (1.0 - update)
    da_r = d_reset * reset * (1.0 - reset)

    dh = dh + wh[:hidden].T @ da_r + wh[hidden : 2 * hidden].T @ da_u
    dx = wx[:hidden].T @ da_r + wx[hidden : 2 * hidden].T @ da_u + wx[2 * hidden :].T @ da_c

    da = np.concatenate((da_r, da_u, da_c))
    dwx = da.reshape(-1, 1) * x.reshape(1, -1)
    dwh = np.empty_like(wh)
    dwh[:hidden] = da_r.reshape(-1, 1) * h.reshape(1, -1)
    dwh[hidden : 2 * hidden] = da_u.reshape(-1, 1) * h.reshape(1, -1)
    dwh[2 * hidden :] = da_c.reshape(-1, 1) * gated.reshape(1, -1)
    return dx, dh, dwx, dwh, da


def lstm_forward(x, h, c, wx, wh, b):
    hidden = h.shape[0]
    a = wx @ x + wh @ h + b
    gates = np.exp(-np.logaddexp(0.0, -a))
    i_gate = gates[:hidden]
    f_gate = gates[hidden : 2 * hidden]
    cand = np.tanh(a[2 * hidden : 3 * hidden])
    o_gate = gates[3 * hidden :]
    c_new = f_gate * c + i_gate * cand
    tc = np.tanh(c_new)
    h_new = o_gate * tc
    return h_new, c_new, i_gate, f_gate, cand, o_gate, tc


def lstm_backward(gh, gc, x, h, c, wx, wh, i_gate, f_gate, cand, o_gate, tc):
    d_o = gh * tc
    d_cell = gc + gh * o_gate * (1.0 - tc * tc)
    d_f = d_cell * c
    dc = d_cell * f_gate
    d_i = d_cell * cand
    d_cand = d_cell * i_gate

    da_i = d_i * i_gate * (1.0 - i_gate)
    da_f = d_f * f_gate * (1.0 - f_gate)
    da_g = d_cand * (1.0 - cand * cand)
    da_o = d_o * o_gate * (1.0 - o_gate)
    da = np.concatenate((da_i, da_f, da_g, da_o))

    dx = wx.T @ da
    dh = wh.T @ da
    dwx = da.reshape(-1, 1) * x.reshape(1, -1)
    dwh = da.reshape(-1, 1) * h.reshape(1, -1)
    return dx, dh, dc, dwx, dwh, da
