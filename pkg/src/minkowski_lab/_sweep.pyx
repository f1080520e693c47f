# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Euler characteristic sweeps over a Freudenthal lattice complex.

Both kernels return the Euler characteristic after each vertex activation.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def sweep_chi(const cnp.int64_t[::1] order, const cnp.int64_t[::1] shape, bint periodic,
              const cnp.int64_t[::1] tmpl_dim, const cnp.int64_t[:, :, ::1] tmpl_off):
    """Incremental sweep: activate vertices one at a time in ``order``.

    Template row ``m`` is one simplex incident to a vertex: its dimension
    ``tmpl_dim[m]`` and the lattice offsets of its other vertices.  A simplex is
    counted when its last vertex activates.
    """
    cdef Py_ssize_t nv = order.shape[0]
    cdef Py_ssize_t nd = shape.shape[0]
    cdef Py_ssize_t nt = tmpl_dim.shape[0]
    cdef Py_ssize_t i, m, j, a
    cdef cnp.int64_t t, rem, c, flat, chi, k
    cdef cnp.int64_t coord[3]
    cdef cnp.int64_t stride[3]
    cdef bint ok, interior
    active_arr = np.zeros(nv, dtype=np.uint8)
    out_arr = np.empty(nv, dtype=np.int64)
    # flat offsets and per-row reach along each axis
    flat_arr = np.zeros((nt, max(nd, 1)), dtype=np.int64)
    lo_arr = np.zeros((nt, 3), dtype=np.int64)
    hi_arr = np.zeros((nt, 3), dtype=np.int64)
    sign_arr = np.empty(nt, dtype=np.int64)
    cdef unsigned char[::1] active = active_arr
    cdef cnp.int64_t[::1] out = out_arr
    cdef cnp.int64_t[:, ::1] foff = flat_arr
    cdef cnp.int64_t[:, ::1] lo = lo_arr
    cdef cnp.int64_t[:, ::1] hi = hi_arr
    cdef cnp.int64_t[::1] sign = sign_arr

    stride[nd - 1] = 1
    for a in range(nd - 2, -1, -1):
        stride[a] = stride[a + 1] * shape[a + 1]
    for m in range(nt):
        sign[m] = 1 if tmpl_dim[m] % 2 == 0 else -1
        for j in range(tmpl_dim[m]):
            flat = 0
            for a in range(nd):
                c = tmpl_off[m, j, a]
                flat += c * stride[a]
                if c < lo[m, a]:
                    lo[m, a] = c
                if c > hi[m, a]:
                    hi[m, a] = c
            foff[m, j] = flat

    chi = 0
    for i in range(nv):
        t = order[i]
        rem = t
        interior = True
        for a in range(nd):
            coord[a] = rem // stride[a]
            rem = rem - coord[a] * stride[a]
            if coord[a] == 0 or coord[a] == shape[a] - 1:
                interior = False
        for m in range(nt):
            k = tmpl_dim[m]
            ok = True
            if interior:
                for j in range(k):
                    if not active[t + foff[m, j]]:
                        ok = False
                        break
            elif not periodic:
                for a in range(nd):
                    if coord[a] + lo[m, a] < 0 or coord[a] + hi[m, a] >= shape[a]:
                        ok = False
                        break
                if ok:
                    for j in range(k):
                        if not active[t + foff[m, j]]:
                            ok = False
                            break
            else:
                for j in range(k):
                    flat = 0
                    for a in range(nd):
                        c = (coord[a] + tmpl_off[m, j, a] + shape[a]) % shape[a]
                        flat += c * stride[a]
                    if not active[flat]:
                        ok = False
                        break
            if ok:
                chi += sign[m]
        active[t] = 1
        out[i] = chi
    return out_arr


def birth_chi(const cnp.int64_t[::1] rank, const cnp.int64_t[::1] shape,
              const cnp.int64_t[::1] parent, const cnp.int64_t[::1] mask,
              const cnp.int64_t[::1] sign):
    """Non-periodic sweep by simplex birth times, one pass over the lattice.

    ``rank[t]`` is the activation position of vertex ``t``.  Chains are listed
    parents first; chain ``q`` extends ``parent[q]`` by the cell corner whose
    axis set has bit mask ``mask[q]`` (chain 0 is the bare vertex).  A simplex's
    birth is the largest rank among its vertices, built up along the chain.
    """
    cdef Py_ssize_t nv = rank.shape[0]
    cdef Py_ssize_t nd = shape.shape[0]
    cdef Py_ssize_t nq = parent.shape[0]
    cdef Py_ssize_t q, a, t
    cdef cnp.int64_t r, bmask
    cdef cnp.int64_t stride[3]
    cdef cnp.int64_t coord[3]
    contrib_arr = np.zeros(nv, dtype=np.int64)
    off_arr = np.zeros(nq, dtype=np.int64)
    best_arr = np.zeros(nq, dtype=np.int64)
    cdef cnp.int64_t[::1] contrib = contrib_arr
    cdef cnp.int64_t[::1] off = off_arr
    cdef cnp.int64_t[::1] best = best_arr

    stride[nd - 1] = 1
    for a in range(nd - 2, -1, -1):
        stride[a] = stride[a + 1] * shape[a + 1]
    for q in range(nq):
        for a in range(nd):
            if mask[q] & (1 << a):
                off[q] += stride[a]
    for a in range(nd):
        coord[a] = 0

    for t in range(nv):
        # axes along which t sits on the upper face
        bmask = 0
        for a in range(nd):
            if coord[a] == shape[a] - 1:
                bmask |= 1 << a
        best[0] = rank[t]
        contrib[rank[t]] += 1
        for q in range(1, nq):
            if mask[q] & bmask:
                continue
            r = rank[t + off[q]]
            if best[parent[q]] > r:
                r = best[parent[q]]
            best[q] = r
            contrib[r] += sign[q]
        a = nd - 1
        while a >= 0:
            coord[a] += 1
            if coord[a] < shape[a]:
                break
            coord[a] = 0
            a -= 1
    for t in range(1, nv):
        contrib[t] += contrib[t - 1]
    return contrib_arr
