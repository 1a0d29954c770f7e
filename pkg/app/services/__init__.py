# app/services/__init__.py
from .case_parser import parse_case, validate_case, case_to_json, remove_generators
from .power_flow import ac_power_flow, branch_flows
from .opf_solver import solve_acopf, solve_dcopf, solve_opf
from .mixture_model import fit_em, log_likelihood, pdf, log_pdf, sample_direct, select_components
from .uniform_streams import SrsStream, LhsStream, SobolStream, lhs_block, make_stream
from .discrepancy import star_discrepancy_1d, star_discrepancy_grid
from .mh_sampler import mh_step, run_chain, acceptance_rate, mixture_log_target
from .wind_power import power_curve, farm_output, denormalize, normalize_columns
from .popf_engine import sample_loads, run_popf, error_index
from .comparison import compare_methods, compute_reference
