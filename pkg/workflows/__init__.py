from .simulate_workflow import run_simulate_workflow
from .run_workflow import run_sampler_workflow
from .color_workflow import run_color_workflow
from .diagnose_workflow import run_diagnose_workflow

# Sub-commands of main.py
WORKFLOW_TYPES = {
    "simulate": run_simulate_workflow,
    "run": run_sampler_workflow,
    "color": run_color_workflow,
    "diagnose": run_diagnose_workflow,
}
