"""32-bit signed integer semantics shared by the IR, the folder and the executors.

Division truncates toward zero, ``%`` takes the sign of the dividend, shift
counts are taken modulo 32 and ``>>`` is arithmetic.  ``INT_MIN / -1`` wraps.
"""

from __future__ import annotations

INT_MIN = -(1 << 31)
INT_MAX = (1 << 31) - 1

BINARY_OPS = (
    "add", "sub", "mul", "div", "mod",
    "shl", "shr", "and", "or", "xor",
    "eq", "ne", "lt", "le", "gt", "ge",
    "land", "lor",
)
UNARY_OPS = ("neg", "not", "lnot", "copy")
COMPARE_OPS = ("eq", "ne", "lt", "le", "gt", "ge")
# ops whose result is always 0 or 1
BOOLEAN_OPS = COMPARE_OPS + ("land", "lor", "lnot")
TRAPPING_OPS = ("div", "mod")

C_SYMBOL = {
    "add": "+", "sub": "-", "mul": "*", "div": "/", "mod": "%",
    "shl": "<<", "shr": ">>", "and": "&", "or": "|", "xor": "^",
    "eq": "==", "ne": "!=", "lt": "<", "le": "<=", "gt": ">", "ge": ">=",
    "land": "&&", "lor": "||",
    "neg": "-", "not": "~", "lnot": "!",
}
SYMBOL_OP = {sym: op for op, sym in C_SYMBOL.items() if op not in ("neg", "not", "lnot")}

# swapping the operands of a comparison
SWAPPED = {"lt": "gt", "gt": "lt", "le": "ge", "ge": "le", "eq": "eq", "ne": "ne"}
NEGATED = {"lt": "ge", "ge": "lt", "le": "gt", "gt": "le", "eq": "ne", "ne": "eq"}


class DivisionByZero(ArithmeticError):
    pass


def wrap(x: int) -> int:
    x &= 0xFFFFFFFF
    return x - 0x100000000 if x & 0x80000000 else x


def _div(a: int, b: int) -> int:
    if b == 0:
        raise DivisionByZero("division by zero")
    q = abs(a) // abs(b)
    return wrap(q if (a < 0) == (b < 0) else -q)


def _mod(a: int, b: int) -> int:
    if b == 0:
        raise DivisionByZero("division by zero")
    r = abs(a) % abs(b)
    return wrap(-r if a < 0 else r)


_BIN = {
    "add": lambda a, b: wrap(a + b),
    "sub": lambda a, b: wrap(a - b),
    "mul": lambda a, b: wrap(a * b),
    "div": _div,
    "mod": _mod,
    "shl": lambda a, b: wrap(a << (b & 31)),
    "shr": lambda a, b: a >> (b & 31),
    "and": lambda a, b: a & b,
    "or": lambda a, b: a | b,
    "xor": lambda a, b: a ^ b,
    "eq": lambda a, b: int(a == b),
    "ne": lambda a, b: int(a != b),
    "lt": lambda a, b: int(a < b),
    "le": lambda a, b: int(a <= b),
    "gt": lambda a, b: int(a > b),
    "ge": lambda a, b: int(a >= b),
    "land": lambda a, b: int(bool(a) and bool(b)),
    "lor": lambda a, b: int(bool(a) or bool(b)),
}

_UN = {
    "neg": lambda a: wrap(-a),
    "not": lambda a: ~a,
    "lnot": lambda a: int(a == 0),
    "copy": lambda a: a,
}


def binary(op: str, a: int, b: int) -> int:
    return _BIN[op](a, b)


def unary(op: str, a: int) -> int:
    return _UN[op](a)


def evaluate(op: str, args) -> int:
    """Evaluate an assign-statement operator over already-resolved operands."""
    if op == "const":
        return wrap(args[0])
    if len(args) == 1:
        return _UN[op](args[0])
    if op == "select":
        return args[1] if args[0] else args[2]
    return _BIN[op](args[0], args[1])


BINARY_FUNCS = _BIN
UNARY_FUNCS = _UN
