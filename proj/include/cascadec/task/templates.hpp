// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string_view>

// Prompt templates. Each constant mirrors templates/<name>.txt without its
// trailing newline; placeholders are written as <name>.
namespace cascadec::templates {

inline constexpr std::string_view llm_query = R"tpl(<task_profile>
Now consider the following instance:
<instance>
Please respond with the answer only. Please do not output any other responses or any explanations.)tpl";

inline constexpr std::string_view batched_query = R"tpl(<task_profile>
Now consider the following instances:
<instances>
Please respond with the answer only, one line for each instance. Please do not output any other responses or any explanations.
Each response should start with "Output #<index>: ". For example:
Output #1: ...
Output #2: ...)tpl";

inline constexpr std::string_view default_tools_profile = R"tpl(- python packages: You can use any python packages you want. You do not need to install but only import them before using. You can not use supervised-learning method as there is no training data. Though, you can use frozen models if you want.)tpl";

inline constexpr std::string_view advice = R"tpl(Please help me with the following Python programming task:
<task_profile>
<tools_profile>
Notice that the evaluation will severely punish incorrect outputs. Thus, when the function is uncertain, please return `None` to abstain instead of returning an incorrect guess.
The generated function should be robust, instead of only passing the provided examples. You are allowed use global variables to keep track of new incoming data.
Please provide a brief advice on how I should complete this programming task. Provide 2-3 concise sentences summarizing the key coding strategy.)tpl";

inline constexpr std::string_view code_generation = R"tpl(Please write a Python function `<task_api>` that completes the following goal:
<task_profile>
<tools_profile>
Hint: <advice>
Notice that the evaluation will severely punish incorrect outputs. Thus, when the function is uncertain, please return `None` to abstain instead of returning an incorrect guess.
The generated function should be robust, instead of only passing the provided examples. You are allowed use global variables to keep track of new incoming data.
Please respond with the Python implementation of `<task_api>` only. Please do not output any other responses or any explanations.
Your response should be in the following format (the markdown format string should be included):
```python
def <task_api>:
    '''Your Implementation Here.'''
```)tpl";

inline constexpr std::string_view logical_correctness = R"tpl(Consider the following task:
<task_profile>
Consider the following Python function `<task_api>` that is expected to complete the above task:
```python
<code>
```
Please determine whether the function `<task_api>` is correct.
Please output your judgement in the following format: first output "Thought:" and then thoughts on whether this function is correct or not, then output "Answer:" followed by a single answer "yes" or "no".)tpl";

inline constexpr std::string_view fix_decision = R"tpl(Consider the following task:
<task_profile>
Consider the following Python function `<task_api>` that is expected to complete the above task:
```python
<code>
```
The function seems to be incorrect:
<error_info>
Please determine whether: A. the function is actually incorrect and can be fixed. B. the function is actually incorrect and can not be easily fixed. C. the function is correct while the case evaluation is incorrect.
Please output your judgement in the following format: first output "Thought:" and then thoughts on whether this function is correct or not, then output "Answer:" followed by a single answer "A", "B" or "C".)tpl";

inline constexpr std::string_view fix_advice = R"tpl(Consider the following task:
<task_profile>
Consider the following Python function `<task_api>` that is expected to complete the above task:
```python
<code>
```
The function seems to be incorrect:
<error_info>
Please provide a brief advice on how I should fix the function. Provide 2-3 concise sentences summarizing the key coding strategy.
The fix should be robust and general, instead of only passing the provided error cases.)tpl";

inline constexpr std::string_view fix_code = R"tpl(Consider the following task:
<task_profile>
Consider the following Python function `<task_api>` that is expected to complete the above task:
```python
<code>
```
The function seems to be incorrect:
<error_info>
Hint: <advice>
Please fix the code. The fix should be robust and general, instead of only passing the provided error cases.
Please respond with the fixed Python implementation of `<task_api>` only. Please do not output any other responses or any explanations.
Your response should be in the following format (the markdown format string should be included):
```python
def <task_api>:
    '''Your Implementation Here.'''
```)tpl";

inline constexpr std::string_view tool_loop = R"tpl(<task_profile>
Please do not directly answer the problem. This should be an interactive process. You are allowed to take one of the following actions:
<tools_profile>
Interaction Examples:
<interaction_examples>
Now consider the following instance:
<instance>
Your respond should strictly follow this format: first output `Thought:` followed by your thought process, then output `Action:` followed by one of the actions mentioned above.)tpl";

} // namespace cascadec::templates
