"""MCP server exposing graph analysis, bounds and simulations as tools."""

import logging

import numpy as np
from mcp.server import Server
from mcp.types import TextContent, Tool

from .bounds import compute_bounds_report
from .consensus import growth_rate_trials, robust_consensus_trials
from .experiments import graph_summary
from .graph import Graph, benchmark_graph, load_bundled_graph, parse_graph
from .noise import make_noise

logger = logging.getLogger(__name__)

MAX_TOOL_TRIALS = 200
MAX_TOOL_ITERATIONS = 2000

app = Server("maxcons")

_GRAPH_PROPERTIES = {
    "edge_list": {
        "type": "string",
        "description": "Graph as text: first line 'N E', then E lines 'i j'. Overrides the generator.",
    },
    "one_indexed": {
        "type": "boolean",
        "description": "Edge list uses 1-based node indices",
        "default": False,
    },
    "bundled": {
        "type": "string",
        "description": "Name of a packaged topology (e.g., 'petersen')",
    },
    "n_nodes": {
        "type": "integer",
        "description": "Nodes of the generated random geometric graph",
        "default": 75,
    },
    "graph_seed": {
        "type": "integer",
        "description": "Seed of the generated graph",
        "default": 0,
    },
    "target_rho": {
        "type": "number",
        "description": "Grow the connection radius until the spectral radius reaches this value",
    },
}

_NOISE_PROPERTIES = {
    "family": {
        "type": "string",
        "enum": ["gaussian", "laplace", "uniform"],
        "description": "Noise distribution",
        "default": "gaussian",
    },
    "variance": {
        "type": "number",
        "description": "Noise variance",
        "default": 1.0,
    },
    "p": {
        "type": "number",
        "description": "Per-iteration edge erasure probability in [0, 1)",
        "default": 0.0,
    },
}

_RUN_PROPERTIES = {
    "t_max": {
        "type": "integer",
        "description": f"Iterations of the zero-initialised run (at most {MAX_TOOL_ITERATIONS})",
        "default": 400,
    },
    "trials": {
        "type": "integer",
        "description": f"Independent trials (at most {MAX_TOOL_TRIALS})",
        "default": 50,
    },
    "seed": {
        "type": "integer",
        "description": "Seed of the simulation streams",
        "default": 0,
    },
}


@app.list_tools()
async def list_tools() -> list[Tool]:
    """List available tools."""
    return [
        Tool(
            name="graph_summary",
            description="Node and edge counts, spectral radius, diameter and degree histogram of a graph",
            inputSchema={"type": "object", "properties": dict(_GRAPH_PROPERTIES)},
        ),
        Tool(
            name="compute_bounds",
            description="Upper and lower bounds on the noise-induced growth rate of max consensus",
            inputSchema={"type": "object", "properties": {**_GRAPH_PROPERTIES, **_NOISE_PROPERTIES}},
        ),
        Tool(
            name="estimate_growth",
            description="Monte Carlo estimate of the growth rate from zero-initialised noisy max consensus",
            inputSchema={
                "type": "object",
                "properties": {**_GRAPH_PROPERTIES, **_NOISE_PROPERTIES, **_RUN_PROPERTIES},
            },
        ),
        Tool(
            name="robust_consensus",
            description="Run the two-run robust max consensus algorithm and report its bias",
            inputSchema={
                "type": "object",
                "properties": {
                    **_GRAPH_PROPERTIES,
                    **_NOISE_PROPERTIES,
                    **_RUN_PROPERTIES,
                    "initial_values": {
                        "type": "array",
                        "items": {"type": "number"},
                        "description": "Measurements x_i(0), one per node (default: evenly spaced over [100, 200])",
                    },
                    "t2": {
                        "type": "integer",
                        "description": "Iterations of the compensated run (default: twice the diameter)",
                    },
                },
            },
        ),
    ]


@app.call_tool()
async def call_tool(name: str, arguments: dict) -> list[TextContent]:
    """Handle tool calls."""
    try:
        if name == "graph_summary":
            result = _graph_summary(arguments)
        elif name == "compute_bounds":
            result = _compute_bounds(arguments)
        elif name == "estimate_growth":
            result = _estimate_growth(arguments)
        elif name == "robust_consensus":
            result = _robust_consensus(arguments)
        else:
            result = f"Unknown tool: {name}"
        return [TextContent(type="text", text=result)]
    except Exception as e:
        error_msg = f"Error: {str(e)}"
        logger.error(error_msg, exc_info=True)
        return [TextContent(type="text", text=error_msg)]


def _graph_from_arguments(arguments: dict) -> Graph:
    if arguments.get("edge_list"):
        return parse_graph(arguments["edge_list"], one_indexed=bool(arguments.get("one_indexed", False)))
    if arguments.get("bundled"):
        return load_bundled_graph(arguments["bundled"])
    return benchmark_graph(
        n_nodes=int(arguments.get("n_nodes", 75)),
        seed=int(arguments.get("graph_seed", 0)),
        target_rho=arguments.get("target_rho"),
    )


def _capped(arguments: dict, key: str, default: int, cap: int) -> int:
    value = int(arguments.get(key, default))
    if not 1 <= value <= cap:
        raise ValueError(f"'{key}' must lie in [1, {cap}], got {value}")
    return value


def _graph_summary(arguments: dict) -> str:
    summary = graph_summary(_graph_from_arguments(arguments))
    histogram = ", ".join(f"{d}: {count}" for d, count in summary["degree_histogram"].items())
    return "\n".join(
        [
            f"Nodes: {summary['n_nodes']}",
            f"Edges: {summary['edge_count']}",
            f"Spectral radius: {summary['rho']:.6f}",
            f"Diameter: {summary['diameter']}",
            f"Degree histogram: {histogram}",
        ]
    )


def _compute_bounds(arguments: dict) -> str:
    g = _graph_from_arguments(arguments)
    model = make_noise(arguments.get("family", "gaussian"), float(arguments.get("variance", 1.0)))
    report = compute_bounds_report(model, g, float(arguments.get("p", 0.0)))

    lines = [f"Bounds for {model.describe()} on N={report.n_nodes}, rho={report.rho:.4f}, p={report.p:g}:"]
    for field, value in report.model_dump().items():
        if field in ("n_nodes", "rho", "p", "family", "variance") or value is None:
            continue
        lines.append(f"  {field}: {value:.6f}")
    return "\n".join(lines)


def _estimate_growth(arguments: dict) -> str:
    g = _graph_from_arguments(arguments)
    model = make_noise(arguments.get("family", "gaussian"), float(arguments.get("variance", 1.0)))
    p = float(arguments.get("p", 0.0))
    t_max = _capped(arguments, "t_max", 400, MAX_TOOL_ITERATIONS)
    trials = _capped(arguments, "trials", 50, MAX_TOOL_TRIALS)

    summary = growth_rate_trials(g, model, p, t_max, trials, seed=int(arguments.get("seed", 0)))
    spread = max(summary.per_node_mean) - min(summary.per_node_mean)
    return "\n".join(
        [
            f"Growth rate estimate ({trials} trials, t_max={t_max}):",
            f"  mean: {summary.mean:.6f} ± {summary.stderr:.6f}",
            f"  per-node spread: {spread:.6f}",
            f"  largest per-node variance: {max(summary.per_node_variance):.6f}",
        ]
    )


def _robust_consensus(arguments: dict) -> str:
    g = _graph_from_arguments(arguments)
    model = make_noise(arguments.get("family", "gaussian"), float(arguments.get("variance", 1.0)))
    p = float(arguments.get("p", 0.0))
    t_max = _capped(arguments, "t_max", 400, MAX_TOOL_ITERATIONS)
    trials = _capped(arguments, "trials", 50, MAX_TOOL_TRIALS)

    if arguments.get("initial_values") is not None:
        x0 = np.asarray(arguments["initial_values"], dtype=float)
    else:
        x0 = np.linspace(100.0, 200.0, g.n_nodes)
    t2 = arguments.get("t2")

    result = robust_consensus_trials(
        g, x0, model, p, t_max, None if t2 is None else int(t2), trials, seed=int(arguments.get("seed", 0))
    )
    return "\n".join(
        [
            f"Robust max consensus ({trials} trials, t_max={t_max}, t2={result.iteration_count}):",
            f"  true maximum: {result.true_max:.6f}",
            f"  mean final estimate: {np.mean(result.final_estimates):.6f}",
            f"  bias: {result.bias:.6f}",
            f"  variance of node 0 across trials: {result.variance_across_trials:.6f}",
        ]
    )


async def main():
    """Run the MCP server."""
    from mcp.server.stdio import stdio_server

    async with stdio_server() as (read_stream, write_stream):
        init_options = app.create_initialization_options()
        await app.run(read_stream, write_stream, init_options)
