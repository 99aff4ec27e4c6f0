#pragma once

#include <string>
#include <vector>

#include "ultra/annotations.hpp"
#include "ultra/describe.hpp"
#include "ultra/mdp.hpp"
#include "ultra/sha256.hpp"

namespace ultra {

enum class PromptKind { Identification, CaseAnalysis, RewardGeneration };

inline const char* to_string(PromptKind k) {
    switch (k) {
        case PromptKind::Identification: return "identification";
        case PromptKind::CaseAnalysis: return "case_analysis";
        default: return "reward_generation";
    }
}

struct AdvisorPrompt {
    PromptKind kind = PromptKind::Identification;
    std::string env_kind;
    int episode_id = 0;
    int window_begin = 0;
    int window_end = 0;
    std::string rendered_text;
    std::string content_hash; // sha256 of rendered_text

    void finalize() { content_hash = Sha256::hex(rendered_text); }
};

namespace prompts {

inline std::string pong_background() {
    return
        "Background\n"
        "It is an 80x80 grid simulation game that mimics table tennis (ping-pong): "
        "control the racket to hit the ball sent by the opponent. Whoever fails to catch "
        "it loses. The winner's reward is 1 point, and the loser's reward -1 point. The "
        "game ends when the first person reaches 21 points.\n\n"
        "Components of this game\n"
        "Our racket, the opponent racket, and ball move in this 80x80 grid simulation "
        "game. Both our racket and the opponent racket are a 2x8 vector, and ball is a "
        "single cell. Both our racket and the opponent racket can only move horizontally, "
        "which means that their y coordinates will not change. Therefore, we use the tuple "
        "{minimal x, maximal x, minimal y, maximal y} to denote the positions of rackets. "
        "We use the tuple {x, y} to denote the position of ball. We use the above tuple to "
        "denote the movement range of the opponent racket: {0, 7, 8, 9} ~ {73, 80, 8, 9}; "
        "We use the above tuple to denote the movement range of our racket: "
        "{0, 7, 70, 71} ~ {73, 80, 70, 71}.\n\n"
        "Agent objective\n"
        "We assign our racket with an agent to learn to control how to move in order to "
        "hit the ball sent by the opponent and defeat the opponent (first to reach 21 "
        "points). We model the game as an MDP: the agent observes its state and takes an "
        "action based on its policy and updates its policy based on the reward from the "
        "environment. The process repeats until the game ends.\n\n"
        "How to catch the ball\n"
        "Only if the ball is close to the 8 coordinate points on the upper surface of the "
        "racket. Here is an example: if the ball location is {52, 69}, only if the "
        "location of our racket is from {52, 59, 70, 71} to {46, 53, 70, 71}, our racket "
        "can catch the ball.\n\n";
}

inline std::string hopper_background() {
    return
        "Background\n"
        "The environment is hopper-lite. It is a continuous control environment that "
        "simulates a planar one-legged robot trying to hop forward without falling. We "
        "make the hopper hop forward as far as possible while maintaining balance. We "
        "model the game as an MDP: the agent observes its state and takes an action based "
        "on its policy and updates its policy based on the reward from the environment. "
        "The process repeats until the game ends.\n\n"
        "Components of this environment\n"
        "State space: the state is a 11-dimensional continuous vector capturing the "
        "hopper's physical condition: (1) torso horizontal position (meters), (2) torso "
        "vertical position (used to detect falling) (meters), (3) torso pitch (radians), "
        "(4) torso horizontal velocity (m/s), (5) torso vertical velocity (m/s), (6) "
        "torso pitch velocity (rad/s), (7) hip joint angle (radians), (8) hip joint "
        "angular velocity (rad/s), (9) knee joint angle (radians), (10) knee joint "
        "angular velocity (rad/s), (11) ankle joint angle (radians).\n"
        "Action space: the action is a 3-dimensional continuous vector, representing the "
        "torque applied to each joint: (1) torque applied at the hip joint, ranging from "
        "-1 to 1, (2) torque applied at the knee joint, ranging from -1 to 1, (3) torque "
        "at the ankle joint, ranging from -1 to 1.\n"
        "Reward function: the environment reward = forward velocity + alive bonus - "
        "0.001 * control cost, where the alive bonus is +1.0 per surviving timestep.\n"
        "Termination conditions: the episode ends if the torso vertical position falls "
        "below 0.7 meters, or the absolute torso pitch angle exceeds 0.628 radians.\n\n"
        "Agent objective\n"
        "We assign this robot with an agent to make the hopper hop forward as far as "
        "possible while maintaining balance.\n\n";
}

inline std::string background(const std::string& env_kind) {
    return env_kind == "pong" ? pong_background() : hopper_background();
}

inline std::string trajectory_text(const std::string& env_kind, const Trajectory& trajectory,
                                   int begin, int end) {
    std::string out;
    for (int t = begin; t < end; ++t)
        out += describe_state(env_kind, trajectory.transitions.at(t)).text + "\n";
    return out;
}

inline std::string output_format_clause(int begin, int end) {
    return
        "Output format\n"
        "The format of your identified results must be: "
        "{timeslot " + std::to_string(begin) + ", <critical or not>, <corrected actions if "
        "agents' actions are unproper>, <explanation>}, "
        "{timeslot " + std::to_string(begin + 1) + ", <critical or not>, <corrected actions "
        "if agents' actions are unproper>, <explanation>}, ..., "
        "{timeslot " + std::to_string(end - 1) + ", <critical or not>, <corrected actions if "
        "agents' actions are unproper>, <explanation>}.\n"
        "You must output the identified results state by state. If the agent's action is "
        "proper at a critical state, you do not have to give a corrected action for that "
        "timeslot. If the state is uncritical, the corrected action is <none>.\n";
}

} // namespace prompts

// Identification prompt: Background, Components, Agent objective,
// identification instructions, trajectory window, Output format.
inline AdvisorPrompt build_identification_prompt(const std::string& env_kind,
                                                 const Trajectory& trajectory, int begin,
                                                 int end) {
    if (begin >= end) throw EmptyWindowError("build_identification_prompt: empty window");
    if (end > static_cast<int>(trajectory.size()) || begin < 0)
        throw EmptyWindowError("build_identification_prompt: window outside trajectory");

    AdvisorPrompt p;
    p.kind = PromptKind::Identification;
    p.env_kind = env_kind;
    p.episode_id = trajectory.episode_id;
    p.window_begin = begin;
    p.window_end = end;

    std::string text = prompts::background(env_kind);
    text += "Identification instructions\n";
    if (env_kind == "pong") {
        text +=
            "(i) This is the historical trajectory in the episode \"" +
            std::to_string(trajectory.episode_id) + "\". You must identify all the critical "
            "states in this episode. An uncritical state is one where the agent's actions "
            "will not change the movement of the ball, for example while the ball is moving "
            "towards the opponent after a launch.\n"
            "(ii) You need to use reasoning to determine whether the action in each state "
            "has an impact on future rewards, that is, whether it affects the agent's "
            "ability to catch and launch the ball.\n"
            "(iii) You need to analyze the movement direction of the ball, the destination "
            "of the ball based on movement direction, and the position of our racket, to "
            "infer whether the racket's current state is important.\n"
            "(iv) When you identify if those states are critical or not, you must also "
            "infer if the racket agent took proper actions at those critical states, and "
            "correct improper actions by outputting the corrected actions "
            "(stay/move left/move right).\n\n";
    } else {
        text +=
            "We give you a piece of the agent's trajectory from timeslot " +
            std::to_string(begin) + " to timeslot " + std::to_string(end - 1) +
            " in the episode " + std::to_string(trajectory.episode_id) + ".\n"
            "(i) Your goal is to identify all the critical states in this time interval: "
            "states where the action taken by the agent has an impact on future rewards, "
            "for example actions that will lead to termination in the future.\n"
            "(ii) After you identify if states are critical or not, you must infer if the "
            "robot agent's actions are correct at those critical states and give corrected "
            "actions if needed, following the action space in this environment: (torque "
            "applied at the hip joint, torque applied at the knee joint, torque at the "
            "ankle joint), ranging from -1 to 1.\n\n";
    }
    text += "Trajectory\n" + prompts::trajectory_text(env_kind, trajectory, begin, end) + "\n";
    text += prompts::output_format_clause(begin, end);

    p.rendered_text = std::move(text);
    p.finalize();
    return p;
}

// Case-analysis prompt over a complete episode; analysis focus depends on the
// episode outcome.
inline AdvisorPrompt build_case_analysis_prompt(const std::string& env_kind,
                                                const Trajectory& trajectory,
                                                const std::vector<CriticalAnnotation>&
                                                    annotations) {
    if (!trajectory.complete())
        throw IncompleteEpisodeError("build_case_analysis_prompt: trajectory not terminal");

    AdvisorPrompt p;
    p.kind = PromptKind::CaseAnalysis;
    p.env_kind = env_kind;
    p.episode_id = trajectory.episode_id;
    p.window_begin = 0;
    p.window_end = static_cast<int>(trajectory.size());

    bool lost = trajectory.terminal_reason == TerminalReason::Failure;
    std::string text = prompts::background(env_kind);
    text += "Analysis instructions\n";
    text += "(i) This is the historical trajectory in the episode \"" +
            std::to_string(trajectory.episode_id) + "\". You must identify all the critical "
            "states in this episode.\n";
    if (lost) {
        text += "(ii) After you identify critical states in the historical trajectory, you "
                "must analyze why our agent lost this episode, for example wrong movements "
                "or moving to the ball's destination too late.\n";
    } else {
        text += "(ii) This episode was not lost; focus your analysis on the effective "
                "actions the agent took at the critical states.\n";
    }
    text += "(iii) You also must analyze when our agent took the great action at those "
            "critical states, and how those actions should be rewarded.\n\n";

    if (!annotations.empty()) {
        text += "Previously identified critical states\n";
        text += render_annotations(annotations) + "\n\n";
    }
    text += "Trajectory\n" +
            prompts::trajectory_text(env_kind, trajectory, 0, static_cast<int>(trajectory.size())) +
            "\n";
    text += "Output format\n"
            "The format of your analysis results must be: {timeslot 0, <critical or not>}, "
            "{timeslot 1, <critical or not>}, ... You do not have to output all the "
            "critical states, but you must then give a detailed analysis of the agent's "
            "failures and of when it took great actions, and how those actions should be "
            "rewarded.\n";

    p.rendered_text = std::move(text);
    p.finalize();
    return p;
}

// Reward prompt for a single transition; embeds the case-analysis text and the
// transition's local context (its state and successor state).
inline AdvisorPrompt build_reward_prompt(const std::string& env_kind, const Transition& tr,
                                         const CaseAnalysis& analysis, int timestep) {
    AdvisorPrompt p;
    p.kind = PromptKind::RewardGeneration;
    p.env_kind = env_kind;
    p.episode_id = analysis.episode_id;
    p.window_begin = timestep;
    p.window_end = timestep + 1;

    std::string text = prompts::background(env_kind);
    text += "Generation instructions\n";
    text += "(i) You must assign a numerical reward to guide agent's policy learning based "
            "on the agent's state and action at the timestep " + std::to_string(timestep) +
            ". The scale of the reward is from -1 to 1. Your reward assignment must "
            "consider the impact degree of the agent's action at this time step: if the "
            "agent's action helps its future success, its reward should be positive.\n"
            "(ii) If agent's action has a bad influence on its future outcomes, its reward "
            "should be negative. When you evaluate agent's action, you must infer the "
            "movement from the locations in the continuous time steps.\n\n";

    text += "Case Analysis\n";
    if (analysis.text.empty()) {
        text += "no prior analysis\n\n";
    } else {
        text += analysis.text + "\n\n";
    }

    text += "Local context\n";
    text += describe_state(env_kind, tr).text + "\n";
    {
        // successor line so movement direction is inferable from the context
        Transition next;
        next.timestep = timestep + 1;
        next.state = tr.next_state;
        next.executed_action = tr.executed_action.kind == Action::Kind::Discrete
                                   ? Action::discrete(0, 3)
                                   : Action::continuous(std::vector<double>(
                                         tr.executed_action.vec.size(), 0.0));
        next.env_reward = 0.0;
        text += describe_state(env_kind, next).text + "\n\n";
    }

    text += "Output format\n"
            "The format of your generated results must be: "
            "{reward = <num>, analysis: <your analysis>}.\n";

    p.rendered_text = std::move(text);
    p.finalize();
    return p;
}

} // namespace ultra
