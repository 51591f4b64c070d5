"""Word-level model recovery from LUT-level FPGA netlists."""

from .model import Config, InferredModule
from .netlist import Netlist, load_netlist, parse_netlist
from .pipeline import AnalysisResult, analyze

__all__ = ["AnalysisResult", "Config", "InferredModule", "Netlist", "analyze", "load_netlist", "parse_netlist"]
__version__ = "0.1.0"
