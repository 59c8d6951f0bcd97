"""Core model: handles, the wire codec, nesting, links, associations."""

import random

import pytest
from hypothesis import given, strategies as st

from servnet.errors import (
    CrossNetworkPermanentLink,
    DuplicateChildName,
    ForeignNode,
    InvalidServiceName,
    MalformedUri,
    ParseError,
    UnknownParent,
    UnknownService,
)
from servnet.model import Handle, Network, ServiceId, ServiceNode

from ._gen import random_handle

URI = "http://1234.5.6.7:8888"


def make_node(name="svc"):
    return ServiceNode(sid=ServiceId(name))


# -- wire codec ---------------------------------------------------------------

class TestHandleCodec:
    def test_published_example(self):
        h = Handle(URI, ("Service1", "Service2"))
        assert h.to_wire() == "<U>http://1234.5.6.7:8888</U><S>Service1</S><S>Service2</S>"

    def test_single_segment(self):
        h = Handle(URI, ("Only",))
        assert h.to_wire() == f"<U>{URI}</U><S>Only</S>"
        assert Handle.from_wire(h.to_wire()) == h

    def test_missing_u_rejected(self):
        with pytest.raises(ParseError):
            Handle.from_wire("<S>Service1</S>")

    @pytest.mark.parametrize("wire", [
        "",
        "<U>http://a:1</U> <S>x</S>",          # whitespace between elements
        "<U>http://a:1</U><S>x</S>junk",
        "<U>http://a:1</U><U>http://b:2</U>",  # two U elements
        "<U>http://a:1</U><S></S>",            # empty segment
        "<U></U><S>x</S>",                     # empty base uri
        "<u>http://a:1</u>",                   # case matters
    ])
    def test_malformed(self, wire):
        with pytest.raises(ParseError):
            Handle.from_wire(wire)

    def test_fuzz_round_trip(self):
        rng = random.Random(42)
        for _ in range(1000):
            h = random_handle(rng)
            assert Handle.from_wire(h.to_wire()) == h

    @given(st.integers(min_value=0, max_value=2 ** 63))
    def test_round_trip_property(self, seed):
        h = random_handle(random.Random(seed))
        assert Handle.from_wire(h.to_wire()) == h


class TestHandleValidation:
    def test_base_uri_must_be_absolute(self):
        with pytest.raises(MalformedUri):
            Handle("not-a-uri", ("x",))

    @pytest.mark.parametrize("bad", ["a<b", "a>b", "a/b", ""])
    def test_reserved_name_chars(self, bad):
        with pytest.raises(InvalidServiceName):
            Handle(URI, (bad,))

    def test_case_sensitive_comparison(self):
        assert Handle(URI, ("A",)) != Handle(URI, ("a",))

    def test_child_and_parent(self):
        h = Handle(URI, ("a",)).child("b")
        assert h.path == ("a", "b")
        assert h.parent().path == ("a",)
        assert h.name == "b"


# -- nesting --------------------------------------------------------------------

class TestAddNested:
    def test_published_path_example(self):
        net = Network(URI)
        h1 = net.add_nested(net.root_handle(), "Service1", make_node())
        h2 = net.add_nested(h1, "Service2", make_node())
        assert h2 == Handle(URI, ("Service1", "Service2"))

    def test_add_under_empty_root(self):
        net = Network(URI)
        h = net.add_nested(net.root_handle(), "top", make_node())
        assert h.path == ("top",)

    def test_duplicate_name(self):
        net = Network(URI)
        net.add_nested(net.root_handle(), "x", make_node())
        with pytest.raises(DuplicateChildName):
            net.add_nested(net.root_handle(), "x", make_node())

    def test_unknown_parent(self):
        net = Network(URI)
        with pytest.raises(UnknownParent):
            net.add_nested(Handle(URI, ("ghost",)), "x", make_node())

    def test_reserved_chars_rejected(self):
        net = Network(URI)
        with pytest.raises(InvalidServiceName):
            net.add_nested(net.root_handle(), "a<b", make_node())


class TestResolve:
    def test_round_trip(self):
        net = Network(URI)
        node = make_node()
        h = net.add_nested(net.root_handle(), "x", node)
        assert net.resolve_handle(h) is node

    def test_unknown_service(self):
        net = Network(URI)
        with pytest.raises(UnknownService):
            net.resolve_handle(Handle(URI, ("NoSuch",)))

    def test_foreign_node(self):
        net = Network(URI)
        with pytest.raises(ForeignNode):
            net.resolve_handle(Handle("http://elsewhere:1", ("x",)))


# -- permanent links -----------------------------------------------------------------

class TestPermanentLinks:
    def setup_method(self):
        self.net = Network(URI)
        self.a = self.net.add_nested(self.net.root_handle(), "a", make_node())
        self.b = self.net.add_nested(self.net.root_handle(), "b", make_node())

    def test_link_siblings(self):
        self.net.link_permanent(self.a, self.b, True)
        assert self.b in self.net.resolve_handle(self.a).permanent_links
        # directed: b does not automatically link back
        assert self.a not in self.net.resolve_handle(self.b).permanent_links

    def test_cross_network_rejected(self):
        foreign = Handle("http://other:9", ("x",))
        with pytest.raises(CrossNetworkPermanentLink):
            self.net.link_permanent(self.a, foreign, True)

    def test_remove_missing_is_noop(self):
        self.net.link_permanent(self.a, self.b, False)
        assert self.net.resolve_handle(self.a).permanent_links == set()

    def test_idempotent(self):
        for _ in range(2):
            self.net.link_permanent(self.a, self.b, True)
        assert self.net.resolve_handle(self.a).permanent_links == {self.b}
        for _ in range(2):
            self.net.link_permanent(self.a, self.b, False)
        assert self.net.resolve_handle(self.a).permanent_links == set()

    def test_target_must_exist(self):
        with pytest.raises(UnknownService):
            self.net.link_permanent(self.a, Handle(URI, ("ghost",)), True)


class TestAssociations:
    def test_ordered_set_semantics(self):
        net = Network(URI)
        s = net.add_nested(net.root_handle(), "s", make_node())
        net.add_association(s, "http://remote-node:8000")
        net.add_association(s, "http://other:8001")
        net.add_association(s, "http://remote-node:8000")
        assert net.resolve_handle(s).associations == [
            "http://remote-node:8000", "http://other:8001",
        ]

    def test_malformed_uri(self):
        net = Network(URI)
        s = net.add_nested(net.root_handle(), "s", make_node())
        with pytest.raises(MalformedUri):
            net.add_association(s, "not a uri")

    def test_unknown_service(self):
        net = Network(URI)
        with pytest.raises(UnknownService):
            net.add_association(Handle(URI, ("ghost",)), "http://x:1")


# -- structural invariants ---------------------------------------------------------------

def random_ops_network(seed: int) -> Network:
    rng = random.Random(seed)
    net = Network(URI)
    handles = [net.root_handle()]
    for i in range(40):
        op = rng.random()
        if op < 0.6 or len(handles) < 3:
            parent = rng.choice(handles)
            try:
                handles.append(net.add_nested(parent, f"s{i}", make_node()))
            except DuplicateChildName:
                pass
        elif op < 0.9:
            a, b = rng.choice(handles[1:]), rng.choice(handles[1:])
            net.link_permanent(a, b, rng.random() < 0.8)
        else:
            net.add_association(rng.choice(handles[1:]), f"http://assoc:{i}")
    return net


@pytest.mark.parametrize("seed", range(10))
def test_tree_property_single_parent(seed):
    net = random_ops_network(seed)
    seen = {}
    def walk(node, path):
        for name, child in node.children.items():
            assert id(child) not in seen, "node reachable by two nesting paths"
            seen[id(child)] = path + (name,)
            walk(child, path + (name,))
    walk(net.root, ())


@pytest.mark.parametrize("seed", range(10))
def test_permanent_link_locality(seed):
    net = random_ops_network(seed)
    for _, node in net.walk():
        for target in node.permanent_links:
            assert target.base_uri == net.base_uri
