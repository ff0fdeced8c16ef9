# cython: boundscheck=False, wraparound=False, language_level=3
"""Compiled boolean table kernel for lasso evaluation.

Drop-in replacement for `_evalcore_py`; see that module for semantics.
"""

BACKEND = "cython"


def bnot(src, dst):
    cdef const unsigned char[:] s = src
    cdef unsigned char[:] d = dst
    cdef Py_ssize_t i, n = d.shape[0]
    for i in range(n):
        d[i] = s[i] ^ 1


def band(a, b, dst):
    cdef const unsigned char[:] x = a
    cdef const unsigned char[:] y = b
    cdef unsigned char[:] d = dst
    cdef Py_ssize_t i, n = d.shape[0]
    for i in range(n):
        d[i] = x[i] & y[i]


def bor(a, b, dst):
    cdef const unsigned char[:] x = a
    cdef const unsigned char[:] y = b
    cdef unsigned char[:] d = dst
    cdef Py_ssize_t i, n = d.shape[0]
    for i in range(n):
        d[i] = x[i] | y[i]


def next_shift(src, dst, period):
    cdef const unsigned char[:] s = src
    cdef unsigned char[:] d = dst
    cdef Py_ssize_t i, n = d.shape[0]
    cdef Py_ssize_t u = period
    for i in range(n - 1):
        d[i] = s[i + 1]
    d[n - 1] = s[n - u]


def prev_shift(src, dst):
    cdef const unsigned char[:] s = src
    cdef unsigned char[:] d = dst
    cdef Py_ssize_t i, n = d.shape[0]
    d[0] = 0
    for i in range(1, n):
        d[i] = s[i - 1]


def since_pass(a, b, dst):
    cdef const unsigned char[:] x = a
    cdef const unsigned char[:] y = b
    cdef unsigned char[:] d = dst
    cdef Py_ssize_t i, n = d.shape[0]
    cdef unsigned char acc = 0
    for i in range(n):
        acc = y[i] | (x[i] & acc)
        d[i] = acc


def until_pass(a, b, dst, period):
    cdef const unsigned char[:] x = a
    cdef const unsigned char[:] y = b
    cdef unsigned char[:] d = dst
    cdef Py_ssize_t n = d.shape[0]
    cdef Py_ssize_t u = period
    cdef Py_ssize_t start = n - u
    cdef Py_ssize_t r, t, j
    cdef unsigned char res
    for r in range(u):
        res = 0
        for t in range(u):
            j = start + (r + t) % u
            if y[j]:
                res = 1
                break
            if not x[j]:
                break
        d[start + r] = res
    for r in range(start - 1, -1, -1):
        d[r] = y[r] | (x[r] & d[r + 1])


def prog_step(codes, arg_a, arg_b, leafbits, vnext, out):
    cdef const unsigned char[:] c = codes
    cdef const int[:] a = arg_a
    cdef const int[:] b = arg_b
    cdef const unsigned char[:] lf = leafbits
    cdef const unsigned char[:] vn = vnext
    cdef unsigned char[:] o = out
    cdef Py_ssize_t i, n = c.shape[0]
    cdef unsigned char op, bit
    for i in range(n):
        op = c[i]
        if op == 0:
            bit = lf[i]
        elif op == 1:
            bit = o[a[i]] ^ 1
        elif op == 2:
            bit = o[a[i]] & o[b[i]]
        elif op == 3:
            bit = o[a[i]] | o[b[i]]
        elif op == 4:
            bit = vn[a[i]]
        else:
            bit = o[b[i]] | (o[a[i]] & vn[i])
        o[i] = bit
