"""Decentralized plug-and-play voltage control for DC islanded microgrids.

The package splits into six layers:

- params: grid description (units, lines, loads) and its file format
- statespace: quasi-stationary design models and structural checks
- synthesis: per-unit LMI gain design and stability certificates
- tfs: transfer-function tools, reference prefilters, load compensators
- pnp: admission control for hot plug-in and unplug requests
- sim: stiff closed-loop time-domain simulation with live topology changes

The mgpnp command-line tool (mgpnp.cli) fronts the same operations.
"""

from .params import (DguParams, GridGraph, InputError, LineParams, dump_grid,
                     format_num, load_grid, parse_grid, parse_si, save_grid)
from .statespace import (AugmentedDgu, RankReport, StateSpaceModel,
                         assemble_full_line_model, assemble_qsl_overall,
                         augment_with_integrator, build_augmented_dgu,
                         build_coupling, build_line_subsystem, build_local_dgu,
                         check_local_controllability, check_rank_gamma)
from .synthesis import (Assumption2Report, CertificateReport, ControllerGains,
                        GlobalCertificate, Infeasible, LmiWeights,
                        SolverNumericalFailure, SynthesisOptions,
                        certify_global_stability, check_assumption_2,
                        default_eta, recheck_constraints, solve_problem_O,
                        synthesize_all, verify_certificate)
from .tfs import (CompensatorDesign, FrequencyResponse, RationalTf, Rejection,
                  closed_loop_reference_tf, default_frequency_grid,
                  design_disturbance_compensator, design_prefilter,
                  desired_tf_template, disturbance_tfs,
                  export_frequency_response_csv, export_spectrum_csv,
                  frequency_response, rational_equal, spectrum)
from .gainsio import (GainsFile, PrefilterEntry, dump_gains, load_gains,
                      parse_gains, save_gains)
from .pnp import (PlugRequest, PnpDecision, evaluate_plug_in, evaluate_unplug,
                  format_decision)
from .sim import (BumplessState, Event, Scenario, SimConfig, SimTrace,
                  SimulationError, bumpless_switch, dump_scenario,
                  export_trace_csv, load_scenario, load_trace_csv, metrics,
                  parse_scenario, resolve_scenario, save_scenario, simulate)

__version__ = "0.1.0"

__all__ = [
    "AugmentedDgu", "Assumption2Report", "BumplessState", "CertificateReport",
    "CompensatorDesign", "ControllerGains", "DguParams", "Event",
    "FrequencyResponse", "GainsFile", "GlobalCertificate", "GridGraph",
    "Infeasible", "InputError", "LineParams", "LmiWeights", "PlugRequest",
    "PnpDecision", "PrefilterEntry", "RankReport", "RationalTf", "Rejection",
    "Scenario", "SimConfig", "SimTrace", "SimulationError",
    "SolverNumericalFailure", "StateSpaceModel", "SynthesisOptions",
    "assemble_full_line_model", "assemble_qsl_overall",
    "augment_with_integrator", "build_augmented_dgu", "build_coupling",
    "build_line_subsystem", "build_local_dgu", "bumpless_switch",
    "certify_global_stability", "check_assumption_2",
    "check_local_controllability", "check_rank_gamma",
    "closed_loop_reference_tf", "default_eta", "default_frequency_grid",
    "design_disturbance_compensator", "design_prefilter",
    "desired_tf_template", "disturbance_tfs", "dump_gains", "dump_grid",
    "dump_scenario", "evaluate_plug_in", "evaluate_unplug",
    "export_frequency_response_csv", "export_spectrum_csv",
    "export_trace_csv", "format_decision", "format_num", "frequency_response",
    "load_gains", "load_grid", "load_scenario", "load_trace_csv", "metrics",
    "parse_gains", "parse_grid", "parse_scenario", "parse_si",
    "rational_equal", "recheck_constraints", "resolve_scenario", "save_gains",
    "save_grid", "save_scenario", "simulate", "solve_problem_O", "spectrum",
    "synthesize_all", "verify_certificate",
]
