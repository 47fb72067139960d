"""Prompt templates for the three call roles.

Templates are fixed text with three placeholders: ``{problem}`` (statement
including I/O format and examples), ``{solution}`` (a candidate's explanation
and code), and ``{verdict_reasoning}`` (the verification reasoning from the
previous round). Rendering substitutes placeholders literally and changes
nothing else.
"""

from __future__ import annotations

from .domain import Candidate, Problem, Role

GENERATION_TEMPLATE = (
    "You are solving the given programming contest problem with a C++ solution.\n"
    "\n"
    "{problem}"
)

VERIFICATION_TEMPLATE = (
    "You are given a programming contest problem and a proposed solution. "
    "Your task is to determine whether the solution is correct (should receive Accepted) "
    "or incorrect (e.g., Wrong Answer, Time Limit Exceeded, Runtime Error, etc.).\n"
    "\n"
    "Important requirements:\n"
    "-- Carefully reason about all edge cases and constraints.\n"
    "-- If you decide the solution is incorrect, you MUST identify at least one clear reason, "
    "such as a logical flaw, missing case, incorrect complexity, or a specific counterexample.\n"
    "-- A counterexample should be described concretely (e.g., a specific input and what goes wrong).\n"
    "-- Do NOT hedge: pick exactly one verdict, Correct or Incorrect.\n"
    "\n"
    "Your response MUST follow EXACTLY this format (with no extra text before or after):\n"
    'Line 1: "Verdict: Correct." or "Verdict: Incorrect."\n'
    "Line 2+: One or few short paragraphs explaining the reasoning for that verdict. "
    "If Incorrect, you MUST mention at least one specific failing scenario, logical flaw, "
    "or counterexample.\n"
    "\n"
    "{problem}\n"
    "\n"
    "{solution}"
)

REFINEMENT_TEMPLATE = (
    "You are correcting a programming contest submission. A judge provided a verdict "
    "explaining why the prior attempt failed. Read the feedback carefully and emit an "
    "improved C++ solution. The judge feedback may be noisy and the previous solution "
    "might actually be correct, but you must still output a solution using the same "
    "format (solution explanation followed by reference code).\n"
    "\n"
    "{problem}\n"
    "\n"
    "{solution}\n"
    "\n"
    "{verdict_reasoning}"
)


class PromptContractError(ValueError):
    """A required placeholder source is missing (or an unused one was given)."""


def candidate_text(candidate: Candidate) -> str:
    """The ``{solution}`` substitution: explanation followed by the code."""
    if candidate.explanation:
        return f"{candidate.explanation}\n\n{candidate.source_code}"
    return candidate.source_code


def render_prompt(
    role: Role,
    problem: Problem,
    prior: Candidate | None = None,
    feedback: str | None = None,
) -> str:
    """Fill the template for ``role``; placeholder substitution only."""
    if role is Role.GENERATION:
        if prior is not None or feedback is not None:
            raise PromptContractError("generation prompts take no prior candidate or feedback")
        return GENERATION_TEMPLATE.replace("{problem}", problem.statement)
    if role is Role.VERIFICATION:
        if prior is None:
            raise PromptContractError("verification prompts require the candidate under review")
        if feedback is not None:
            raise PromptContractError("verification prompts take no feedback")
        return VERIFICATION_TEMPLATE.replace("{problem}", problem.statement).replace(
            "{solution}", candidate_text(prior)
        )
    if role is Role.REFINEMENT:
        if prior is None or feedback is None:
            raise PromptContractError("refinement prompts require the prior candidate and feedback")
        return (
            REFINEMENT_TEMPLATE.replace("{problem}", problem.statement)
            .replace("{solution}", candidate_text(prior))
            .replace("{verdict_reasoning}", feedback)
        )
    raise PromptContractError(f"unknown prompt role: {role}")
