"""servnet: lightweight self-organising networks of nested services.

Packetized XML-RPC messaging, metadata-described services, leveled access
control, autonomic dynamic linking, a mediated trust protocol, and a
concept-chain query store, all hosted behind one HTTP base server per node.
"""

from .errors import ServnetError
from .model import Handle, LinkKind, Network, ServiceId, ServiceNode
from .node import Node, NodeConfig, factory_spec, load_config

__version__ = "0.1.0"

__all__ = [
    "Handle",
    "LinkKind",
    "Network",
    "Node",
    "NodeConfig",
    "ServiceId",
    "ServiceNode",
    "ServnetError",
    "factory_spec",
    "load_config",
    "__version__",
]
