"""Pure-Python hot kernels.  ``_kernels.pyx`` mirrors these loop for loop."""

# loop ids
CO, CI, X, Y, FX, FY = range(6)

# operand policies
PER_PE = 0       # every PE fetches its own operand each step
BROADCAST = 1    # each distinct operand is fetched once per step and shared
STATIONARY = 2   # operand pinned in a PE register, refetched only on change
ACCUMULATE = 0   # output kept in a per-PE accumulator register
SPILL = 1        # reduced partial sums read-modify-written to memory each step

_WEIGHT_DIMS = (CO, CI, FX, FY)


def conv_nest(padded, weights, out, stride):
    """out[co, x, y] += padded[ci, x*s + fx, y*s + fy] * weights[co, ci, fx, fy]"""
    n_co, n_ci, n_fx, n_fy = weights.shape
    _, n_x, n_y = out.shape
    for co in range(n_co):
        for ci in range(n_ci):
            for x in range(n_x):
                for y in range(n_y):
                    acc = out[co, x, y]
                    for fx in range(n_fx):
                        for fy in range(n_fy):
                            acc += padded[ci, x * stride + fx, y * stride + fy] * weights[co, ci, fx, fy]
                    out[co, x, y] = acc


def simulate_loop_nest(bounds, spatial, temporal, stride, px, py,
                       input_policy, weight_policy, weight_latch, output_policy):
    """Walk the convolution loop nest with loops ``spatial`` unrolled onto the
    PE array and ``temporal`` iterated outer-to-inner.

    Returns ``(input_reads, weight_reads, output_reads, output_writes,
    register_accesses)``.
    """
    n_co, n_ci, n_x, n_y, n_fx, n_fy = bounds
    sa, sb = spatial
    na, nb = bounds[sa], bounds[sb]
    n_in = n_ci * px * py
    n_w = n_co * n_ci * n_fx * n_fy
    n_out = n_co * n_x * n_y

    in_stamp = [0] * n_in
    w_stamp = [0] * n_w
    out_stamp = [0] * n_out
    out_stored = [False] * n_out
    # weight latches are keyed by the PE coordinates the weight index depends on
    wa = sa in _WEIGHT_DIMS
    wb = sb in _WEIGHT_DIMS
    latch = [-1] * ((na if wa else 1) * (nb if wb else 1))
    acc = [-1] * (na * nb)

    in_reads = w_reads = out_reads = out_writes = regs = 0
    idx = [0] * 6
    t0, t1, t2, t3 = temporal
    step = 0
    for i0 in range(bounds[t0]):
        idx[t0] = i0
        for i1 in range(bounds[t1]):
            idx[t1] = i1
            for i2 in range(bounds[t2]):
                idx[t2] = i2
                for i3 in range(bounds[t3]):
                    idx[t3] = i3
                    step += 1
                    for a in range(na):
                        idx[sa] = a
                        for b in range(nb):
                            idx[sb] = b
                            co, ci, x, y, fx, fy = idx
                            i_in = (ci * px + x * stride + fx) * py + y * stride + fy
                            i_w = ((co * n_ci + ci) * n_fx + fx) * n_fy + fy
                            i_out = (co * n_x + x) * n_y + y

                            if input_policy == PER_PE:
                                in_reads += 1
                            elif in_stamp[i_in] != step:
                                in_stamp[i_in] = step
                                in_reads += 1

                            slot = (a if wa else 0) * (nb if wb else 1) + (b if wb else 0)
                            if weight_policy == PER_PE:
                                w_reads += 1
                            elif weight_policy == BROADCAST:
                                if w_stamp[i_w] != step:
                                    w_stamp[i_w] = step
                                    w_reads += 1
                            elif latch[slot] != i_w:
                                w_reads += 1
                            if weight_latch and latch[slot] != i_w:
                                latch[slot] = i_w
                                regs += 1

                            if output_policy == ACCUMULATE:
                                pe = a * nb + b
                                held = acc[pe]
                                if held != i_out:
                                    if held >= 0:
                                        out_writes += 1
                                        out_stored[held] = True
                                    if out_stored[i_out]:
                                        out_reads += 1
                                    acc[pe] = i_out
                                regs += 1
                            elif out_stamp[i_out] != step:
                                out_stamp[i_out] = step
                                if out_stored[i_out]:
                                    out_reads += 1
                                out_stored[i_out] = True
                                out_writes += 1
    if output_policy == ACCUMULATE:
        out_writes += sum(1 for held in acc if held >= 0)
    return in_reads, w_reads, out_reads, out_writes, regs
