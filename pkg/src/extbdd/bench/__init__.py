"""Benchmarks: N-Queens, 4x4x4 Tic-Tac-Toe draws and circuit equivalence."""
from .stats import RunStats, StatsCollector
from .queens import queens, queens_base
from .tictactoe import lines, tictactoe
from .blif import BlifNetlist, parse_blif, print_blif
from .picotrav import picotrav

__all__ = ["RunStats", "StatsCollector", "queens", "queens_base", "lines", "tictactoe",
           "BlifNetlist", "parse_blif", "print_blif", "picotrav"]
