import logging

from typing_extensions import Literal

from langgraph.graph import START, END, StateGraph

from taxelsim.configuration import Configuration
from taxelsim.state import EpisodeState, EpisodeStateInput, EpisodeStateOutput
from taxelsim.utils import build_traces

from taxelsim.nodes import query_policy, reset_envs, step_envs

logger = logging.getLogger(__name__)

# Supersteps per control step (query_policy, step_envs) plus reset/finalize headroom
SUPERSTEPS_PER_STEP = 2
RECURSION_HEADROOM = 8


def finalize_traces(state: EpisodeState):
    """ Split the batched step records into one trace per environment """

    traces = build_traces(state.env, state.records)
    logger.info(f"[finalize_traces] Built {len(traces)} traces over {state.step_index} steps")
    return {"traces": traces}


def route_episode(state: EpisodeState) -> Literal["finalize_traces", "query_policy"]:
    """ Keep stepping until every environment has terminated or run out of steps """

    if state.done:
        return "finalize_traces"
    else:
        return "query_policy"


def recursion_limit(max_steps: int) -> int:
    return SUPERSTEPS_PER_STEP * max_steps + RECURSION_HEADROOM


# Add nodes and edges
builder = StateGraph(EpisodeState, input=EpisodeStateInput, output=EpisodeStateOutput, config_schema=Configuration)
builder.add_node("reset_envs", reset_envs)
builder.add_node("query_policy", query_policy)
builder.add_node("step_envs", step_envs)
builder.add_node("finalize_traces", finalize_traces)

# Add edges
builder.add_edge(START, "reset_envs")
builder.add_edge("reset_envs", "query_policy")
builder.add_edge("query_policy", "step_envs")
builder.add_conditional_edges("step_envs", route_episode)
builder.add_edge("finalize_traces", END)

graph = builder.compile()
