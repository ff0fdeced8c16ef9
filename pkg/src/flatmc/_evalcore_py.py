"""Pure-Python boolean table kernel for lasso evaluation.

Mirror of the compiled `_evalcore` extension; same functions, same
semantics, operating on bytearrays of 0/1 flags indexed by word position.
"""

BACKEND = "python"


def _mask(n: int) -> int:
    return int.from_bytes(b"\x01" * n, "little")


def bnot(src, dst):
    n = len(dst)
    v = int.from_bytes(bytes(src), "little") ^ _mask(n)
    dst[:] = v.to_bytes(n, "little")


def band(a, b, dst):
    n = len(dst)
    v = int.from_bytes(bytes(a), "little") & int.from_bytes(bytes(b), "little")
    dst[:] = v.to_bytes(n, "little")


def bor(a, b, dst):
    n = len(dst)
    v = int.from_bytes(bytes(a), "little") | int.from_bytes(bytes(b), "little")
    dst[:] = v.to_bytes(n, "little")


def next_shift(src, dst, period):
    """dst[i] = src[i+1]; the successor of the last cell wraps one period back."""
    n = len(dst)
    dst[: n - 1] = src[1:]
    dst[n - 1] = src[n - period]


def prev_shift(src, dst):
    """dst[0] = 0, dst[i] = src[i-1]."""
    n = len(dst)
    dst[1:] = src[: n - 1]
    dst[0] = 0


def since_pass(a, b, dst):
    """dst[i] = b[i] or (a[i] and dst[i-1]); forward scan from position 0."""
    acc = 0
    for i in range(len(dst)):
        acc = b[i] | (a[i] & acc)
        dst[i] = acc


def until_pass(a, b, dst, period):
    """Until over a word whose last `period` cells repeat forever.

    The final copy is resolved cyclically (a satisfying position must occur
    within one full wrap), then values propagate backward to position 0 via
    the expansion law.
    """
    n = len(dst)
    start = n - period
    for r in range(period):
        res = 0
        for t in range(period):
            j = start + (r + t) % period
            if b[j]:
                res = 1
                break
            if not a[j]:
                break
        dst[start + r] = res
    for i in range(start - 1, -1, -1):
        dst[i] = b[i] | (a[i] & dst[i + 1])


def prog_step(codes, arg_a, arg_b, leafbits, vnext, out):
    """One backward evaluation step of a compiled formula program.

    codes[i]: 0 leaf, 1 not, 2 and, 3 or, 4 next, 5 until; arg_a/arg_b are
    child positions.  Children precede parents, so `out` may be read back.
    """
    n = len(codes)
    for i in range(n):
        op = codes[i]
        if op == 0:
            bit = leafbits[i]
        elif op == 1:
            bit = out[arg_a[i]] ^ 1
        elif op == 2:
            bit = out[arg_a[i]] & out[arg_b[i]]
        elif op == 3:
            bit = out[arg_a[i]] | out[arg_b[i]]
        elif op == 4:
            bit = vnext[arg_a[i]]
        else:
            bit = out[arg_b[i]] | (out[arg_a[i]] & vnext[i])
        out[i] = bit
