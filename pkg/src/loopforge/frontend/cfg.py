"""Graph algorithms over successor maps ``{node: [succ, ...]}``."""

from __future__ import annotations


def predecessors(succ: dict) -> dict:
    preds = {n: [] for n in succ}
    for n, ss in succ.items():
        for s in ss:
            if n not in preds[s]:
                preds[s].append(n)
    return preds


def reverse_postorder(succ: dict, entry) -> list:
    seen = {entry}
    order = []
    stack = [(entry, iter(succ[entry]))]
    while stack:
        node, it = stack[-1]
        for s in it:
            if s not in seen:
                seen.add(s)
                stack.append((s, iter(succ[s])))
                break
        else:
            stack.pop()
            order.append(node)
    order.reverse()
    return order


def reachable(succ: dict, entry) -> set:
    return set(reverse_postorder(succ, entry))


def dominators(succ: dict, entry) -> dict:
    """Immediate dominators by the iterative algorithm of Cooper, Harvey and Kennedy.

    Unreachable nodes are absent from the result; ``idom[entry] == entry``.
    """
    order = reverse_postorder(succ, entry)
    index = {n: i for i, n in enumerate(order)}
    preds = predecessors(succ)
    idom = {entry: entry}

    def intersect(a, b):
        while a != b:
            while index[a] > index[b]:
                a = idom[a]
            while index[b] > index[a]:
                b = idom[b]
        return a

    changed = True
    while changed:
        changed = False
        for n in order[1:]:
            new = None
            for p in preds[n]:
                if p in idom:
                    new = p if new is None else intersect(p, new)
            if idom.get(n) != new:
                idom[n] = new
                changed = True
    return idom


def dominates(idom: dict, a, b) -> bool:
    """True when ``a`` dominates ``b`` (reflexive)."""
    while True:
        if a == b:
            return True
        parent = idom.get(b)
        if parent is None or parent == b:
            return False
        b = parent


def dom_tree(idom: dict) -> dict:
    children = {n: [] for n in idom}
    for n, d in idom.items():
        if n != d:
            children[d].append(n)
    return children


def dominance_frontiers(succ: dict, idom: dict) -> dict:
    preds = predecessors(succ)
    df = {n: set() for n in idom}
    for n in idom:
        ps = [p for p in preds[n] if p in idom]
        if len(ps) < 2:
            continue
        for p in ps:
            runner = p
            while runner != idom[n]:
                df[runner].add(n)
                runner = idom[runner]
    return df


def natural_loop_body(succ: dict, header, latches) -> set:
    preds = predecessors(succ)
    body = {header}
    stack = [l for l in latches if l != header]
    body.update(stack)
    while stack:
        n = stack.pop()
        for p in preds[n]:
            if p not in body:
                body.add(p)
                stack.append(p)
    return body


def back_edges(succ: dict, entry, idom: dict | None = None) -> tuple:
    """Split DFS retreating edges into back edges and irreducible ones.

    Returns ``(back, irreducible)``: lists of ``(tail, head)`` edges.
    """
    idom = idom if idom is not None else dominators(succ, entry)
    back, irreducible = [], []
    on_stack = {entry}
    seen = {entry}
    stack = [(entry, iter(succ[entry]))]
    while stack:
        node, it = stack[-1]
        advanced = False
        for s in it:
            if s in on_stack:
                (back if dominates(idom, s, node) else irreducible).append((node, s))
            elif s not in seen:
                seen.add(s)
                on_stack.add(s)
                stack.append((s, iter(succ[s])))
                advanced = True
                break
        if not advanced:
            stack.pop()
            on_stack.discard(node)
    # dominated non-retreating edges are impossible: a dominator is an ancestor
    # in every DFS tree, so it is on the stack when the edge is explored
    return back, irreducible


def strongly_connected_components(succ: dict) -> list:
    """Tarjan's algorithm, iterative; components in reverse topological order."""
    index = {}
    low = {}
    on = set()
    st = []
    out = []
    counter = 0
    for root in succ:
        if root in index:
            continue
        work = [(root, iter(succ[root]))]
        index[root] = low[root] = counter
        counter += 1
        st.append(root)
        on.add(root)
        while work:
            node, it = work[-1]
            pushed = False
            for s in it:
                if s not in index:
                    index[s] = low[s] = counter
                    counter += 1
                    st.append(s)
                    on.add(s)
                    work.append((s, iter(succ[s])))
                    pushed = True
                    break
                if s in on:
                    low[node] = min(low[node], index[s])
            if pushed:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                comp = []
                while True:
                    w = st.pop()
                    on.discard(w)
                    comp.append(w)
                    if w == node:
                        break
                out.append(comp)
    return out
