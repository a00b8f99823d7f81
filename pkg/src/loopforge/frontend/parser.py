"""Lexer and recursive-descent parser for the supported C subset."""

from __future__ import annotations

import re

from .. import arith
from ..diagnostics import CompileError
from . import cast as A

KEYWORDS = {
    "int", "void", "if", "else", "for", "while", "do", "break", "continue",
    "return", "goto", "static", "const", "extern",
}
# recognised only to reject them with a precise message
UNSUPPORTED_KEYWORDS = {
    "float", "double", "char", "short", "long", "unsigned", "signed",
    "struct", "union", "enum", "typedef", "switch", "case", "default",
    "sizeof", "volatile", "register", "auto", "_Bool", "inline",
}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\f\v]+)
  | (?P<nl>\n)
  | (?P<lcomment>//[^\n]*)
  | (?P<bcomment>/\*.*?\*/)
  | (?P<pp>\#[^\n]*)
  | (?P<num>0[xX][0-9a-fA-F]+[uUlL]*|[0-9]+[uUlL]*)
  | (?P<char>'(?:\\.|[^\\'])')
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><<=|>>=|\+\+|--|\+=|-=|\*=|/=|%=|&=|\|=|\^=|<<|>>|<=|>=|==|!=|&&|\|\||->|[-+*/%&|^~!<>=?:;,(){}\[\].])
    """,
    re.VERBOSE | re.DOTALL,
)

_ESCAPES = {"n": 10, "t": 9, "r": 13, "0": 0, "\\": 92, "'": 39, '"': 34, "a": 7, "b": 8, "f": 12, "v": 11}


class Token:
    __slots__ = ("kind", "text", "line", "col")

    def __init__(self, kind, text, line, col):
        self.kind, self.text, self.line, self.col = kind, text, line, col

    def __repr__(self):
        return f"Token({self.kind}, {self.text!r}, {self.line}:{self.col})"


def tokenize(source: str, file: str = "<input>") -> list:
    tokens = []
    pos, line, line_start = 0, 1, 0
    n = len(source)
    while pos < n:
        m = _TOKEN_RE.match(source, pos)
        col = pos - line_start + 1
        if m is None:
            raise CompileError(f"unexpected character {source[pos]!r}", file, line, col)
        kind = m.lastgroup
        text = m.group()
        if kind == "pp":
            raise CompileError("unsupported construct: preprocessor directive", file, line, col)
        if kind in ("num", "char", "ident", "op"):
            if kind == "ident" and text in KEYWORDS:
                kind = "kw"
            tokens.append(Token(kind, text, line, col))
        newlines = text.count("\n")
        if newlines:
            line += newlines
            line_start = pos + text.rfind("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


def _int_literal(text: str) -> int:
    text = text.rstrip("uUlL")
    return int(text, 16) if text[:2] in ("0x", "0X") else (int(text, 8) if len(text) > 1 and text[0] == "0" else int(text))


def _char_literal(text: str) -> int:
    body = text[1:-1]
    if body.startswith("\\"):
        return _ESCAPES.get(body[1], ord(body[1]))
    return ord(body)


_BINARY_LEVELS = [
    ("|",), ("^",), ("&",), ("==", "!="), ("<", "<=", ">", ">="), ("<<", ">>"), ("+", "-"), ("*", "/", "%"),
]
_ASSIGN_OPS = {"=": None, "+=": "add", "-=": "sub", "*=": "mul", "/=": "div", "%=": "mod",
               "<<=": "shl", ">>=": "shr", "&=": "and", "|=": "or", "^=": "xor"}


class Parser:
    def __init__(self, source: str, file: str = "<input>"):
        self.file = file
        self.toks = tokenize(source, file)
        self.i = 0
        self.out_params: set = set()

    # token helpers

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, msg: str, tok: Token | None = None):
        tok = tok or self.tok
        return CompileError(msg, self.file, tok.line, tok.col)

    def at(self, text: str) -> bool:
        return self.tok.text == text and self.tok.kind in ("op", "kw")

    def accept(self, text: str) -> Token | None:
        if self.at(text):
            t = self.tok
            self.i += 1
            return t
        return None

    def expect(self, text: str) -> Token:
        if not self.at(text):
            found = self.tok.text or "end of input"
            raise self.error(f"expected '{text}' but found '{found}'")
        t = self.tok
        self.i += 1
        return t

    def ident(self) -> Token:
        t = self.tok
        if t.kind != "ident":
            self._reject_unsupported()
            raise self.error(f"expected identifier but found '{t.text or 'end of input'}'")
        if t.text in UNSUPPORTED_KEYWORDS:
            raise self.error(f"unsupported construct: {t.text}")
        self.i += 1
        return t

    def _reject_unsupported(self):
        t = self.tok
        if t.kind == "ident" and t.text in UNSUPPORTED_KEYWORDS:
            raise self.error(f"unsupported construct: {t.text}")

    def _pos(self, tok: Token) -> dict:
        return {"line": tok.line, "col": tok.col}

    # declarations

    def _qualifiers(self) -> set:
        quals = set()
        while self.tok.kind == "kw" and self.tok.text in ("static", "const", "extern"):
            quals.add(self.tok.text)
            self.i += 1
        return quals

    def _base_type(self) -> str:
        self._reject_unsupported()
        if self.accept("int"):
            # tolerate trailing qualifiers: "int const x"
            self._qualifiers()
            return "int"
        if self.accept("void"):
            return "void"
        raise self.error(f"expected type but found '{self.tok.text or 'end of input'}'")

    def _is_type_start(self) -> bool:
        t = self.tok
        if t.kind == "kw" and t.text in ("int", "void", "static", "const", "extern"):
            return True
        return t.kind == "ident" and t.text in UNSUPPORTED_KEYWORDS

    def parse_unit(self, name: str) -> A.Unit:
        decls = []
        while self.tok.kind != "eof":
            decls.extend(self._external_decl())
        return A.Unit(name, decls, line=1, col=1)

    def _external_decl(self) -> list:
        start = self.tok
        quals = self._qualifiers()
        base = self._base_type()
        if self.at("*"):
            raise self.error("unsupported construct: pointer type")
        name_tok = self.ident()
        if self.at("("):
            return [self._function(name_tok, base)]
        if base == "void":
            raise self.error("unsupported construct: void variable", name_tok)
        decls = []
        while True:
            size = self._array_suffix()
            init = []
            if self.accept("="):
                init = self._global_init(size)
            d = A.GlobalDecl(name_tok.text, size, init, **self._pos(name_tok))
            d.extern = "extern" in quals
            decls.append(d)
            if self.accept(","):
                if self.at("*"):
                    raise self.error("unsupported construct: pointer type")
                name_tok = self.ident()
                continue
            self.expect(";")
            break
        del start
        return decls

    def _array_suffix(self) -> int | None:
        if not self.accept("["):
            return None
        if self.at("]"):
            raise self.error("unsupported construct: array without constant bound")
        tok = self.tok
        size = self._const_eval(self.expression_no_comma())
        self.expect("]")
        if self.at("["):
            raise self.error("unsupported construct: multi-dimensional array")
        if size <= 0:
            raise self.error("array size must be positive", tok)
        return size

    def _global_init(self, size) -> list:
        if size is None:
            tok = self.tok
            try:
                return [self._const_eval(self.expression_no_comma())]
            except CompileError:
                raise CompileError("unsupported construct: non-constant global initializer",
                                   self.file, tok.line, tok.col)
        return self._brace_init(size)

    def _brace_init(self, size) -> list:
        self.expect("{")
        vals = []
        while not self.at("}"):
            tok = self.tok
            try:
                vals.append(self._const_eval(self.expression_no_comma()))
            except CompileError:
                raise CompileError("unsupported construct: non-constant array initializer",
                                   self.file, tok.line, tok.col)
            if not self.accept(","):
                break
        self.expect("}")
        if len(vals) > size:
            raise self.error("too many initializers for array")
        return vals

    def _const_eval(self, e) -> int:
        if isinstance(e, A.Num):
            return arith.wrap(e.value)
        if isinstance(e, A.Unary):
            return arith.unary(e.op, self._const_eval(e.operand))
        if isinstance(e, A.Binary):
            try:
                return arith.binary(e.op, self._const_eval(e.left), self._const_eval(e.right))
            except arith.DivisionByZero:
                raise CompileError("division by zero in constant expression", self.file, e.line, e.col)
        if isinstance(e, A.Logical):
            return arith.binary(e.op, self._const_eval(e.left), self._const_eval(e.right))
        if isinstance(e, A.Ternary):
            return self._const_eval(e.then) if self._const_eval(e.cond) else self._const_eval(e.else_)
        raise CompileError("expected constant expression", self.file, e.line, e.col)

    def _function(self, name_tok: Token, base: str) -> A.FuncDef:
        self.expect("(")
        params = []
        if self.at("void") and self.peek().text == ")":
            self.i += 1
        elif not self.at(")"):
            while True:
                self._qualifiers()
                ptype = self._base_type()
                if ptype == "void":
                    raise self.error("unsupported construct: void parameter")
                out = False
                ptok = self.tok
                if self.accept("*"):
                    out = True
                    if self.at("*"):
                        raise self.error("unsupported construct: pointer type")
                if self.tok.kind == "ident":
                    ptok = self.ident()
                    pname = ptok.text
                else:
                    pname = f"__arg{len(params)}"
                if self.at("["):
                    raise self.error("unsupported construct: array parameter")
                params.append(A.ParamDecl(pname, out, **self._pos(ptok)))
                if not self.accept(","):
                    break
                if self.at("."):
                    raise self.error("unsupported construct: variadic function")
        self.expect(")")
        if self.accept(";"):
            return A.FuncDef(name_tok.text, base == "int", params, None, **self._pos(name_tok))
        self.out_params = {p.name for p in params if p.out}
        body = self.compound()
        self.out_params = set()
        return A.FuncDef(name_tok.text, base == "int", params, body, **self._pos(name_tok))

    # statements

    def compound(self) -> A.Compound:
        t = self.expect("{")
        stmts = []
        while not self.at("}"):
            if self.tok.kind == "eof":
                raise self.error("expected '}' but found 'end of input'")
            stmts.append(self.statement())
        self.expect("}")
        return A.Compound(stmts, **self._pos(t))

    def _local_decl(self) -> A.Node:
        t = self.tok
        quals = self._qualifiers()
        if "extern" in quals:
            raise self.error("unsupported construct: block-scope extern", t)
        base = self._base_type()
        if base == "void":
            raise self.error("unsupported construct: void variable")
        decls = []
        while True:
            if self.at("*"):
                raise self.error("unsupported construct: pointer type")
            nt = self.ident()
            size = self._array_suffix()
            init = None
            if self.accept("="):
                if size is not None:
                    init = self._brace_init(size)
                else:
                    init = self.expression_no_comma()
            decls.append(A.VarDecl(nt.text, size, init, **self._pos(nt)))
            if not self.accept(","):
                break
        self.expect(";")
        if len(decls) == 1:
            return decls[0]
        return A.DeclGroup(decls, **self._pos(t))

    def statement(self) -> A.Node:
        t = self.tok
        pos = self._pos(t)
        if self._is_type_start():
            return self._local_decl()
        if t.kind == "ident" and self.peek().text == ":" and t.text not in UNSUPPORTED_KEYWORDS:
            self.i += 2
            if self.at("}"):
                return A.Labeled(t.text, A.Empty(**pos), **pos)
            return A.Labeled(t.text, self.statement(), **pos)
        if self.at("{"):
            return self.compound()
        if self.accept(";"):
            return A.Empty(**pos)
        if self.accept("if"):
            self.expect("(")
            cond = self.expression()
            self.expect(")")
            then = self.statement()
            else_ = self.statement() if self.accept("else") else None
            return A.If(cond, then, else_, **pos)
        if self.accept("while"):
            self.expect("(")
            cond = self.expression()
            self.expect(")")
            return A.While(cond, self.statement(), **pos)
        if self.accept("do"):
            body = self.statement()
            self.expect("while")
            self.expect("(")
            cond = self.expression()
            self.expect(")")
            self.expect(";")
            return A.DoWhile(body, cond, **pos)
        if self.accept("for"):
            self.expect("(")
            if self.accept(";"):
                init = None
            elif self._is_type_start():
                init = self._local_decl()
            else:
                init = A.ExprStmt(self.expression(), **self._pos(self.tok))
                self.expect(";")
            cond = None if self.at(";") else self.expression()
            self.expect(";")
            step = None if self.at(")") else self.expression()
            self.expect(")")
            return A.For(init, cond, step, self.statement(), **pos)
        if self.accept("break"):
            self.expect(";")
            return A.Break(**pos)
        if self.accept("continue"):
            self.expect(";")
            return A.Continue(**pos)
        if self.accept("return"):
            value = None if self.at(";") else self.expression()
            self.expect(";")
            return A.ReturnStmt(value, **pos)
        if self.accept("goto"):
            label = self.ident().text
            self.expect(";")
            return A.GotoStmt(label, **pos)
        self._reject_unsupported()
        e = self.expression()
        self.expect(";")
        return A.ExprStmt(e, **pos)

    # expressions

    def expression(self) -> A.Node:
        t = self.tok
        e = self.expression_no_comma()
        if not self.at(","):
            return e
        exprs = [e]
        while self.accept(","):
            exprs.append(self.expression_no_comma())
        return A.Comma(exprs, **self._pos(t))

    def expression_no_comma(self) -> A.Node:
        t = self.tok
        left = self._ternary()
        if self.tok.kind == "op" and self.tok.text in _ASSIGN_OPS:
            op_tok = self.tok
            if not isinstance(left, (A.Name, A.Index, A.Deref)):
                raise self.error("expression is not assignable", op_tok)
            self.i += 1
            value = self.expression_no_comma()
            return A.AssignExpr(left, _ASSIGN_OPS[op_tok.text], value, **self._pos(t))
        return left

    def _ternary(self) -> A.Node:
        t = self.tok
        cond = self._logical_or()
        if self.accept("?"):
            then = self.expression()
            self.expect(":")
            else_ = self._ternary()
            return A.Ternary(cond, then, else_, **self._pos(t))
        return cond

    def _logical_or(self) -> A.Node:
        t = self.tok
        left = self._logical_and()
        while self.accept("||"):
            left = A.Logical("lor", left, self._logical_and(), **self._pos(t))
        return left

    def _logical_and(self) -> A.Node:
        t = self.tok
        left = self._binary(0)
        while self.accept("&&"):
            left = A.Logical("land", left, self._binary(0), **self._pos(t))
        return left

    def _binary(self, level: int) -> A.Node:
        if level == len(_BINARY_LEVELS):
            return self._unary()
        t = self.tok
        left = self._binary(level + 1)
        ops = _BINARY_LEVELS[level]
        while self.tok.kind == "op" and self.tok.text in ops:
            op = arith.SYMBOL_OP[self.tok.text]
            self.i += 1
            left = A.Binary(op, left, self._binary(level + 1), **self._pos(t))
        return left

    def _unary(self) -> A.Node:
        t = self.tok
        pos = self._pos(t)
        if self.accept("-"):
            return A.Unary("neg", self._unary(), **pos)
        if self.accept("+"):
            return self._unary()
        if self.accept("~"):
            return A.Unary("not", self._unary(), **pos)
        if self.accept("!"):
            return A.Unary("lnot", self._unary(), **pos)
        if self.at("++") or self.at("--"):
            delta = 1 if self.tok.text == "++" else -1
            self.i += 1
            target = self._unary()
            if not isinstance(target, (A.Name, A.Index, A.Deref)):
                raise self.error("expression is not assignable", t)
            return A.IncDec(target, delta, True, **pos)
        if self.accept("*"):
            nt = self.ident()
            if nt.text not in self.out_params:
                raise CompileError("unsupported construct: pointer dereference", self.file, t.line, t.col)
            return A.Deref(nt.text, **pos)
        if self.accept("&"):
            nt = self.ident()
            if self.at("["):
                raise CompileError("unsupported construct: address of array element", self.file, t.line, t.col)
            return A.AddrOf(nt.text, **pos)
        if self.at("("):
            if self.peek().kind == "kw" and self.peek().text in ("int", "void"):
                raise self.error("unsupported construct: cast")
            if self.peek().kind == "ident" and self.peek().text in UNSUPPORTED_KEYWORDS:
                raise CompileError(f"unsupported construct: {self.peek().text}", self.file,
                                   self.peek().line, self.peek().col)
        if self.tok.kind == "ident" and self.tok.text == "sizeof":
            raise self.error("unsupported construct: sizeof")
        return self._postfix()

    def _postfix(self) -> A.Node:
        e = self._primary()
        while True:
            t = self.tok
            if self.at("++") or self.at("--"):
                if not isinstance(e, (A.Name, A.Index, A.Deref)):
                    raise self.error("expression is not assignable")
                self.i += 1
                e = A.IncDec(e, 1 if t.text == "++" else -1, False, line=e.line, col=e.col)
            elif self.at("["):
                raise self.error("unsupported construct: indexing a non-array expression")
            elif self.at(".") or self.at("->"):
                raise self.error("unsupported construct: member access")
            else:
                return e

    def _primary(self) -> A.Node:
        t = self.tok
        pos = self._pos(t)
        if t.kind == "num":
            self.i += 1
            return A.Num(_int_literal(t.text), **pos)
        if t.kind == "char":
            self.i += 1
            return A.Num(_char_literal(t.text), **pos)
        if t.kind == "ident":
            if t.text in UNSUPPORTED_KEYWORDS:
                raise self.error(f"unsupported construct: {t.text}")
            self.i += 1
            if self.accept("("):
                args = []
                if not self.at(")"):
                    while True:
                        args.append(self.expression_no_comma())
                        if not self.accept(","):
                            break
                self.expect(")")
                return A.CallExpr(t.text, args, **pos)
            if self.accept("["):
                idx = self.expression()
                self.expect("]")
                if self.at("["):
                    raise self.error("unsupported construct: multi-dimensional array")
                return A.Index(t.text, idx, **pos)
            return A.Name(t.text, **pos)
        if self.accept("("):
            e = self.expression()
            self.expect(")")
            return e
        if t.kind == "op" and t.text == '"':
            raise self.error("unsupported construct: string literal")
        raise self.error(f"expected expression but found '{t.text or 'end of input'}'")


def parse_unit(source: str, unit_name: str) -> A.Unit:
    """Parse one translation unit into its syntax tree."""
    return Parser(source, unit_name).parse_unit(unit_name)
