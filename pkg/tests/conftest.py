import pytest

from servnet.node import Node, NodeConfig, factory_spec


@pytest.fixture
def offline_node():
    """Node with a network but no HTTP socket (fast, deterministic)."""
    return Node(NodeConfig(listen=None, base_uri="http://test.local"))


@pytest.fixture
def live_node():
    """Node serving HTTP on an ephemeral localhost port."""
    node = Node(NodeConfig(listen="127.0.0.1:0"))
    node.start()
    yield node
    node.stop()


@pytest.fixture
def echo_node(live_node):
    """Live node with one echo service at /echo."""
    root = live_node.network.root_handle()
    live_node.register_service(root, "echo", factory_spec("Echo"))
    return live_node
