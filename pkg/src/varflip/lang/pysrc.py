"""Python analysis built on the stdlib ast and tokenize modules.

Scope handling follows the language rules that matter for safe renaming:
function/comprehension/class scopes, parameter defaults and decorators
evaluated in the enclosing scope, the first comprehension iterable evaluated
outside the comprehension, walrus targets hoisted out of comprehensions, and
class bodies invisible to nested scopes.

Names we cannot rename reliably are bound for resolution but never extracted:
`global`/`nonlocal` names (the declaration statement carries no renameable
span), `except ... as e` and match-capture names (same), and any binding used
inside an f-string (historically unreliable node offsets). Class-body
assignments and attribute names form the field-collision set, mirroring the
field rule applied to the other languages.
"""

from __future__ import annotations

import ast
import io
import keyword
import tokenize
from dataclasses import dataclass, field

from ..core import Identifier, OccurrenceSpan
from ..errors import ParseError

RESERVED = frozenset(keyword.kwlist) | frozenset(keyword.softkwlist)


def valid_identifier(name: str) -> bool:
    return name.isidentifier() and name not in RESERVED


class _Scope:
    __slots__ = ("kind", "parent", "tags", "globals", "nonlocals", "names", "args")

    def __init__(self, kind: str, parent: "._Scope | None"):
        self.kind = kind  # module | function | class | comprehension
        self.parent = parent
        self.tags: dict[str, set[str]] = {}
        self.globals: set[str] = set()
        self.nonlocals: set[str] = set()
        self.names: list[tuple[ast.Name, bool]] = []  # (node, inside_fstring)
        self.args: list[ast.arg] = []

    def add(self, name: str, tag: str) -> None:
        self.tags.setdefault(name, set()).add(tag)

    def local_names(self) -> set[str]:
        return set(self.tags) - self.globals - self.nonlocals


class _Walker:
    def __init__(self) -> None:
        self.module = _Scope("module", None)
        self.scopes: list[_Scope] = [self.module]
        self.attr_names: set[str] = set()

    def new_scope(self, kind: str, parent: _Scope) -> _Scope:
        s = _Scope(kind, parent)
        self.scopes.append(s)
        return s

    # bind: propagated only through assignment-target structure
    def walk(self, node: ast.AST, scope: _Scope, bind: "str | None" = None,
             fstr: bool = False) -> None:
        if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef, ast.Lambda)):
            self._function(node, scope, fstr)
        elif isinstance(node, ast.ClassDef):
            self._classdef(node, scope, fstr)
        elif isinstance(node, (ast.ListComp, ast.SetComp, ast.DictComp, ast.GeneratorExp)):
            self._comprehension(node, scope, fstr)
        elif isinstance(node, ast.NamedExpr):
            self.walk(node.value, scope, fstr=fstr)
            hoist = scope
            while hoist.kind == "comprehension":
                hoist = hoist.parent
            self.walk(node.target, hoist, bind="value", fstr=fstr)
        elif isinstance(node, ast.Assign):
            self.walk(node.value, scope, fstr=fstr)
            for t in node.targets:
                self.walk(t, scope, bind="value", fstr=fstr)
        elif isinstance(node, ast.AnnAssign):
            self.walk(node.annotation, scope, fstr=fstr)
            if node.value is not None:
                self.walk(node.value, scope, fstr=fstr)
            self.walk(node.target, scope, bind="value" if node.value else "ann", fstr=fstr)
        elif isinstance(node, ast.AugAssign):
            self.walk(node.value, scope, fstr=fstr)
            self.walk(node.target, scope, bind="aug", fstr=fstr)
        elif isinstance(node, (ast.For, ast.AsyncFor)):
            self.walk(node.iter, scope, fstr=fstr)
            self.walk(node.target, scope, bind="value", fstr=fstr)
            for stmt in node.body + node.orelse:
                self.walk(stmt, scope)
        elif isinstance(node, (ast.With, ast.AsyncWith)):
            for item in node.items:
                self.walk(item.context_expr, scope, fstr=fstr)
                if item.optional_vars is not None:
                    self.walk(item.optional_vars, scope, bind="value", fstr=fstr)
            for stmt in node.body:
                self.walk(stmt, scope)
        elif isinstance(node, (ast.Import, ast.ImportFrom)):
            for alias in node.names:
                bound = alias.asname or alias.name.partition(".")[0]
                if bound != "*":
                    scope.add(bound, "import")
        elif isinstance(node, ast.Global):
            scope.globals.update(node.names)
        elif isinstance(node, ast.Nonlocal):
            scope.nonlocals.update(node.names)
        elif isinstance(node, ast.ExceptHandler):
            if node.type is not None:
                self.walk(node.type, scope, fstr=fstr)
            if node.name:
                scope.add(node.name, "except")
            for stmt in node.body:
                self.walk(stmt, scope)
        elif isinstance(node, ast.Name):
            scope.names.append((node, fstr))
            if isinstance(node.ctx, ast.Store):
                scope.add(node.id, bind or "value")
            elif isinstance(node.ctx, ast.Del):
                scope.add(node.id, "del")
        elif isinstance(node, (ast.Tuple, ast.List)):
            for elt in node.elts:
                self.walk(elt, scope, bind=bind, fstr=fstr)
        elif isinstance(node, ast.Starred):
            self.walk(node.value, scope, bind=bind, fstr=fstr)
        elif isinstance(node, ast.Attribute):
            self.attr_names.add(node.attr)
            self.walk(node.value, scope, fstr=fstr)
        elif isinstance(node, ast.JoinedStr):
            for child in ast.iter_child_nodes(node):
                self.walk(child, scope, fstr=True)
        elif isinstance(node, ast.MatchAs):
            if node.pattern is not None:
                self.walk(node.pattern, scope, fstr=fstr)
            if node.name:
                scope.add(node.name, "capture")
        elif isinstance(node, ast.MatchStar):
            if node.name:
                scope.add(node.name, "capture")
        elif isinstance(node, ast.MatchMapping):
            for k, p in zip(node.keys, node.patterns):
                self.walk(k, scope, fstr=fstr)
                self.walk(p, scope, fstr=fstr)
            if node.rest:
                scope.add(node.rest, "capture")
        else:
            for child in ast.iter_child_nodes(node):
                self.walk(child, scope, fstr=fstr)

    def _all_args(self, args: ast.arguments) -> list[ast.arg]:
        out = list(args.posonlyargs) + list(args.args)
        if args.vararg:
            out.append(args.vararg)
        out.extend(args.kwonlyargs)
        if args.kwarg:
            out.append(args.kwarg)
        return out

    def _function(self, node, scope: _Scope, fstr: bool) -> None:
        if not isinstance(node, ast.Lambda):
            scope.add(node.name, "def")
            for dec in node.decorator_list:
                self.walk(dec, scope, fstr=fstr)
            if node.returns is not None:
                self.walk(node.returns, scope, fstr=fstr)
        # defaults and annotations evaluate in the defining scope
        for default in list(node.args.defaults) + [d for d in node.args.kw_defaults if d]:
            self.walk(default, scope, fstr=fstr)
        for arg in self._all_args(node.args):
            if arg.annotation is not None:
                self.walk(arg.annotation, scope, fstr=fstr)
        fn = self.new_scope("function", scope)
        for arg in self._all_args(node.args):
            fn.add(arg.arg, "param")
            fn.args.append(arg)
        body = node.body if isinstance(node.body, list) else [node.body]
        for stmt in body:
            self.walk(stmt, fn)

    def _classdef(self, node: ast.ClassDef, scope: _Scope, fstr: bool) -> None:
        scope.add(node.name, "def")
        for dec in node.decorator_list:
            self.walk(dec, scope, fstr=fstr)
        for base in list(node.bases) + list(node.keywords):
            self.walk(base, scope, fstr=fstr)
        cs = self.new_scope("class", scope)
        for stmt in node.body:
            self.walk(stmt, cs)

    def _comprehension(self, node, scope: _Scope, fstr: bool) -> None:
        cs = self.new_scope("comprehension", scope)
        gens = node.generators
        self.walk(gens[0].iter, scope, fstr=fstr)
        self.walk(gens[0].target, cs, bind="value")
        for cond in gens[0].ifs:
            self.walk(cond, cs)
        for gen in gens[1:]:
            self.walk(gen.iter, cs)
            self.walk(gen.target, cs, bind="value")
            for cond in gen.ifs:
                self.walk(cond, cs)
        if isinstance(node, ast.DictComp):
            self.walk(node.key, cs)
            self.walk(node.value, cs)
        else:
            self.walk(node.elt, cs)


_VALUE_TAGS = frozenset(("value",))
_NON_VARIABLE_TAGS = frozenset(("def", "import"))
_UNSPANNED_TAGS = frozenset(("except", "capture"))


@dataclass
class PyAnalysis:
    blob: bytes
    occurring_names: frozenset[str]
    fingerprint: tuple
    _walker: _Walker = field(repr=False, default=None)
    _line_starts: list[int] = field(repr=False, default_factory=list)
    _cache: dict = field(repr=False, default_factory=dict)

    def identifiers(self, include_parameters: bool) -> tuple[Identifier, ...]:
        if include_parameters not in self._cache:
            self._cache[include_parameters] = _extract(
                self._walker, self.blob, self._line_starts, include_parameters)
        return self._cache[include_parameters]


def analyze(blob: bytes) -> PyAnalysis:
    try:
        text = blob.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"python: not valid UTF-8: {exc}") from None
    try:
        tree = ast.parse(text)
    except (SyntaxError, ValueError, MemoryError, RecursionError) as exc:
        raise ParseError(f"python: {exc}") from None

    token_parts, names = _token_stream(text)
    walker = _Walker()
    for stmt in tree.body:
        walker.walk(stmt, walker.module)

    fp = (token_parts, _scrubbed_dump(text))
    return PyAnalysis(
        blob=blob,
        occurring_names=frozenset(names),
        fingerprint=fp,
        _walker=walker,
        _line_starts=_compute_line_starts(blob),
    )


def _token_stream(text: str) -> tuple[tuple, set[str]]:
    parts = []
    names: set[str] = set()
    skip = {tokenize.COMMENT, tokenize.NL, tokenize.ENCODING}
    try:
        for tok in tokenize.generate_tokens(io.StringIO(text).readline):
            if tok.type in skip:
                continue
            if tok.type == tokenize.NAME:
                names.add(tok.string)
                if keyword.iskeyword(tok.string):
                    parts.append(("kw", tok.string))
                else:
                    parts.append(("name",))
            elif tok.type in (tokenize.NEWLINE, tokenize.INDENT, tokenize.DEDENT,
                              tokenize.ENDMARKER):
                parts.append((tokenize.tok_name[tok.type],))
            else:
                parts.append((tokenize.tok_name[tok.type], tok.string))
    except (tokenize.TokenError, IndentationError, SyntaxError) as exc:
        raise ParseError(f"python: {exc}") from None
    return tuple(parts), names


def _scrubbed_dump(text: str) -> str:
    tree = ast.parse(text)
    for node in ast.walk(tree):
        if isinstance(node, ast.Name):
            node.id = "_"
        elif isinstance(node, ast.arg):
            node.arg = "_"
    return ast.dump(tree, annotate_fields=False)


def _compute_line_starts(blob: bytes) -> list[int]:
    starts = [0]
    pos = blob.find(b"\n")
    while pos != -1:
        starts.append(pos + 1)
        pos = blob.find(b"\n", pos + 1)
    return starts


def _extract(walker: _Walker, blob: bytes, line_starts: list[int],
             include_parameters: bool) -> tuple[Identifier, ...]:
    module = walker.module

    global_everywhere: set[str] = set()
    for scope in walker.scopes:
        global_everywhere |= scope.globals

    # nonlocal declarations poison the owning function binding
    poisoned: set[tuple[int, str]] = set()
    for scope in walker.scopes:
        for name in scope.nonlocals:
            owner = scope.parent
            while owner is not None:
                if owner.kind in ("function", "comprehension") and \
                        name in owner.local_names():
                    poisoned.add((id(owner), name))
                    break
                owner = owner.parent

    field_collision: set[str] = set(walker.attr_names)
    for scope in walker.scopes:
        if scope.kind == "class":
            field_collision |= set(scope.tags)

    def resolve(use_scope: _Scope, name: str) -> "_Scope | None":
        if name in use_scope.globals:
            return module if name in module.local_names() or name in global_everywhere \
                else None
        if name in use_scope.nonlocals:
            owner = use_scope.parent
            while owner is not None:
                if owner.kind in ("function", "comprehension") and \
                        name in owner.local_names():
                    return owner
                owner = owner.parent
            return None
        s: _Scope | None = use_scope
        while s is not None:
            if name in s.local_names() and (s is use_scope or s.kind != "class"):
                return s
            s = s.parent
        return None

    # occurrence spans per (scope, name)
    spans: dict[tuple[int, str], list[tuple[int, int]]] = {}
    bad_span: set[tuple[int, str]] = set()

    def note_span(owner: _Scope, name: str, lineno: int, col: int, in_fstr: bool) -> None:
        key = (id(owner), name)
        if in_fstr:
            bad_span.add(key)
            return
        start = line_starts[lineno - 1] + col
        end = start + len(name.encode("utf-8"))
        if blob[start:end] != name.encode("utf-8"):
            bad_span.add(key)
            return
        spans.setdefault(key, []).append((start, end))

    for scope in walker.scopes:
        for node, in_fstr in scope.names:
            owner = resolve(scope, node.id)
            if owner is not None:
                note_span(owner, node.id, node.lineno, node.col_offset, in_fstr)
        for arg in scope.args:
            note_span(scope, arg.arg, arg.lineno, arg.col_offset, False)

    # collect extractable bindings, merged by name
    merged: dict[str, list[tuple[int, int]]] = {}
    for scope in walker.scopes:
        if scope.kind == "class":
            continue
        for name, tags in scope.tags.items():
            if name in scope.globals or name in scope.nonlocals:
                continue
            if name in global_everywhere and scope.kind == "module":
                continue  # `global` statements mention the name without a span
            if tags & _NON_VARIABLE_TAGS or tags & _UNSPANNED_TAGS:
                continue
            is_param = "param" in tags
            if is_param and not include_parameters:
                continue
            if not is_param and "value" not in tags:
                continue  # declared (ann/aug/del only) but never given a value
            key = (id(scope), name)
            if key in bad_span or key in poisoned:
                continue
            if name in field_collision:
                continue
            if not valid_identifier(name):
                continue
            merged.setdefault(name, []).extend(spans.get(key, ()))

    out = []
    for name, span_list in merged.items():
        if not span_list:
            continue
        uniq = sorted(set(span_list))
        out.append(Identifier(name, tuple(OccurrenceSpan(s, e) for s, e in uniq)))
    out.sort(key=lambda ident: (ident.first_offset, ident.name))
    return tuple(out)
