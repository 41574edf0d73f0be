"""Left-ventricle wall-motion analysis and MI detection with active polynomials."""

from .errors import (ActivePolyError, AlignmentError, ConfigError, DivergenceError, GeometryError,
                     IngestionError, SingularSystemError, UnprocessableFrameError,
                     ValidationError)
from .imaging import EchoSequence, Frame, Landmarks, load_sequence, read_frame, write_frame
from .polyfit import FitProblem, Polynomial, fit_curve, fit_polynomial, fit_polynomial_svd
from .chanvese import ChanVeseParams, LevelSetField, evolve, extract_contour, initialize_levelset
from .ridge import RidgePolynomialPair, fit_ridge_polynomials, paint_wall
from .active import ActivePolynomialPair, SegmentModel, fit_active_polynomials, partition_segments
from .motion import Diagnosis, SegmentVerdict, compute_lvef, diagnose
from .phantom import PhantomConfig, battery, generate_phantom
from .pipeline import EchoReport, PipelineConfig, process_echo, process_frame
from .report import (ConfusionMatrix, MetricSet, compute_metrics, emit_report, evaluate_batch,
                     render_overlay)
from .estimators import ActivePolynomialTransformer, MIDetector, RidgePolynomialRegressor

__version__ = "0.1.0"

__all__ = [
    "ActivePolyError", "AlignmentError", "ConfigError", "DivergenceError", "GeometryError",
    "IngestionError", "SingularSystemError", "UnprocessableFrameError", "ValidationError",
    "EchoSequence", "Frame", "Landmarks", "load_sequence", "read_frame", "write_frame",
    "FitProblem", "Polynomial", "fit_curve", "fit_polynomial", "fit_polynomial_svd",
    "ChanVeseParams", "LevelSetField", "evolve", "extract_contour", "initialize_levelset",
    "RidgePolynomialPair", "fit_ridge_polynomials", "paint_wall",
    "ActivePolynomialPair", "SegmentModel", "fit_active_polynomials", "partition_segments",
    "Diagnosis", "SegmentVerdict", "compute_lvef", "diagnose",
    "PhantomConfig", "battery", "generate_phantom",
    "EchoReport", "PipelineConfig", "process_echo", "process_frame",
    "ConfusionMatrix", "MetricSet", "compute_metrics", "emit_report", "evaluate_batch",
    "render_overlay",
    "ActivePolynomialTransformer", "MIDetector", "RidgePolynomialRegressor",
]
