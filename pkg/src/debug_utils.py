"""
Debug utilities for RANDSMAP pipeline tracking
"""
import logging

logger = logging.getLogger("randsmap.pipeline")


def debug_print(step_name, content, debug_mode=True):
    """
    Debug output for tracking flow through a pipeline

    Args:
        step_name (str): Name of the current step
        content (str): Content to display
        debug_mode (bool): Whether to show debug output
    """
    if debug_mode:
        logger.debug(f"🔍 {step_name}: {content}")


def log_step_start(step_number, step_name, input_data, debug_mode=True):
    """Log the start of a processing step"""
    if debug_mode:
        logger.info(f"🔄 STEP {step_number}: {step_name} - START ({input_data})")


def log_step_end(step_number, step_name, output_data, debug_mode=True):
    """Log the end of a processing step"""
    if debug_mode:
        logger.info(f"✅ STEP {step_number}: {step_name} - DONE ({output_data})")


def log_error(step_name, error_message, debug_mode=True):
    """Log errors with context"""
    if debug_mode:
        logger.error(f"❌ ERROR in {step_name}: {error_message}")


def format_summary(result_data):
    """Format a one-block run summary for console output"""
    lines = [f"📦 {result_data.get('name', 'dataset')}"]
    for key in ("M", "N", "mass_preserving", "mass_drift"):
        if key in result_data:
            lines.append(f"   {key}: {result_data[key]}")
    return "\n".join(lines)
