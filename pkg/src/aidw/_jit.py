"""Numba configuration and vectorizable elementary functions for the kernels.

numba's ``**`` and ``np.exp``/``np.log`` lower to scalar libm calls, which
keeps the interpolation loop from vectorizing. ``flog``/``fexp`` below are
branch-free polynomial versions (relative error ~1e-16 each) built on bit
casts, so LLVM can emit SIMD code for the all-pairs weighting loop.
"""

from __future__ import annotations

import os

import numba
import numpy as np
from llvmlite import ir
from numba import types
from numba.extending import intrinsic

# Wide vectors pay off for the all-pairs loops; LLVM defaults to 256-bit on
# recent Intel parts. Only effective before the first compilation.
if os.environ.get("AIDW_NATIVE_VECTOR_WIDTH", "1") != "0" and numba.config.CPU_FEATURES is None:
    try:
        import llvmlite.binding as _ll

        _ll.initialize_native_target()
        numba.config.CPU_FEATURES = _ll.get_host_cpu_features().flatten() + ",-prefer-256-bit"
    except Exception:  # pragma: no cover - feature probing is best effort
        pass

# Flags for vectorized reductions; inputs are validated finite beforehand.
FAST = {"nnan", "nsz", "arcp", "contract", "reassoc", "afn"}
JIT = dict(nogil=True, cache=True, error_model="numpy")

_I64 = ir.IntType(64)
_F64 = ir.DoubleType()


@intrinsic
def _mantissa(typingctx, x):
    """Significand of positive normal ``x`` rescaled to ``[1, 2)``."""

    def codegen(context, builder, sig, args):
        b = builder.bitcast(args[0], _I64)
        b = builder.and_(b, ir.Constant(_I64, 0x000FFFFFFFFFFFFF))
        b = builder.or_(b, ir.Constant(_I64, 0x3FF0000000000000))
        return builder.bitcast(b, _F64)

    return types.float64(types.float64), codegen


@intrinsic
def _exponent(typingctx, x):
    """Unbiased binary exponent of positive normal ``x`` as a float."""

    def codegen(context, builder, sig, args):
        b = builder.bitcast(args[0], _I64)
        b = builder.lshr(b, ir.Constant(_I64, 52))
        b = builder.sub(b, ir.Constant(_I64, 1023))
        return builder.sitofp(b, _F64)

    return types.float64(types.float64), codegen


@intrinsic
def as_bits(typingctx, x):
    """Bit pattern of a float64 as int64; order-preserving for non-negative values."""

    def codegen(context, builder, sig, args):
        return builder.bitcast(args[0], _I64)

    return types.int64(types.float64), codegen


@intrinsic
def from_bits(typingctx, b):
    def codegen(context, builder, sig, args):
        return builder.bitcast(args[0], _F64)

    return types.float64(types.int64), codegen


@intrinsic
def _pow2(typingctx, t):
    """``2**t`` for integral float ``t`` in ``[-1022, 1023]``."""

    def codegen(context, builder, sig, args):
        n = builder.fptosi(args[0], _I64)
        n = builder.add(n, ir.Constant(_I64, 1023))
        n = builder.shl(n, ir.Constant(_I64, 52))
        return builder.bitcast(n, _F64)

    return types.float64(types.float64), codegen


_LN2_HI = 6.93147180369123816490e-01
_LN2_LO = 1.90821492927058770002e-10
_INV_LN2 = 1.4426950408889634
_SQRT2 = 1.4142135623730951


@numba.njit(inline="always", **JIT)
def flog(x):
    """Natural log of a positive normal float."""
    m = _mantissa(x)
    e = _exponent(x)
    big = m > _SQRT2
    m = m * 0.5 if big else m
    e = e + 1.0 if big else e
    # ln(m) = 2*atanh(s); p(z) fits atanh(s)/s on z = s*s <= 0.0295
    s = (m - 1.0) / (m + 1.0)
    z = s * s
    p = 0.08418906784449322
    p = p * z + 0.09060961001946821
    p = p * z + 0.11111717460704103
    p = p * z + 0.14285708007987824
    p = p * z + 0.20000000030886528
    p = p * z + 0.33333333333276427
    p = p * z + 1.0000000000000002
    return e * _LN2_HI + (e * _LN2_LO + 2.0 * s * p)


@numba.njit(inline="always", **JIT)
def fexp(y):
    """``exp(y)`` for ``y <= 709``; flushes to ~0 below -708."""
    y = y if y > -708.0 else -708.0
    t = np.floor(y * _INV_LN2 + 0.5)
    r = (y - t * _LN2_HI) - t * _LN2_LO
    # Chebyshev-node fit of exp on |r| <= ln(2)/2
    q = 2.7626357241447223e-07
    q = q * r + 2.764018079620985e-06
    q = q * r + 2.4801504346997686e-05
    q = q * r + 0.00019841170270440067
    q = q * r + 0.0013888888932488599
    q = q * r + 0.008333333385667782
    q = q * r + 0.04166666666657314
    q = q * r + 0.16666666666554406
    q = q * r + 0.5000000000000006
    q = q * r + 1.0000000000000067
    q = q * r + 1.0
    return q * _pow2(t)

