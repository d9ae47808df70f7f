"""External-memory binary decision diagrams."""

from . import core, operators
from .errors import (CapacityError, ConfigurationError, EmptyQueueError, EndOfStream,
                     ExtBddError, IntegrityError, PreconditionError, ProtocolError,
                     StateError)
from .manager import (BddHandle, Manager, ManagerConfig, UnreducedHandle, current, deinit,
                      init, is_initialised)
from .operators import BooleanOperator
from .ops import (bdd_and, bdd_apply, bdd_compose, bdd_counter, bdd_diff, bdd_equal,
                  bdd_equiv, bdd_eval, bdd_exists, bdd_false, bdd_forall, bdd_imp,
                  bdd_invimp, bdd_ite, bdd_ithvar, bdd_less, bdd_meta, bdd_nand,
                  bdd_nithvar, bdd_nodecount, bdd_nor, bdd_not, bdd_or, bdd_pathcount,
                  bdd_quantify, bdd_restrict, bdd_satcount, bdd_satmax, bdd_satmin,
                  bdd_sink, bdd_true, bdd_unequal, bdd_varcount, bdd_xnor, bdd_xor, build)

__version__ = "0.1.0"
