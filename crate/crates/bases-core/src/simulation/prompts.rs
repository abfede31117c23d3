//! Prompt templates for the two agent behaviors, in both language settings,
//! plus the rendering of profiles, browsing history, and result titles into
//! them.
//!
//! Query prompting elicits the next `Search[query]` or `Finish[finish]`
//! action; click prompting elicits a single clicked title. The English click
//! instruction asks for a bare number; the Chinese one asks for a reason
//! followed by the number. The parser accepts both forms everywhere.

use crate::Language;
use crate::backends::SearchResult;
use crate::profiles::UserProfile;

use super::Scratchpad;

pub(crate) const QUERY_TEMPLATE_EN: &str = "You are a search engine user with your own profile. Your task is to interact with search engines {max_exceeds_times} times. You have two types of operations to perform:

- Search[query]: When the current round has not reached {max_exceeds_times} times, please raise the next question based on your profile and web browsing history. Your query should be an entity phrase that has a similar topic to an attribute in your user profile. The query must be concise and clear. For example, Search[bollywood growth], Search[hjunk food trax], Search[pseudocyesis information], Search[location of port arthur].

- Finish[finish], When the current round exceeds {max_exceeds_times} times, you need to end your interaction with search engines. For example, Finish [Finish]

** Your Profile **
{profile}

** Web browsing (click) history **
{scratchpad}

** Your action **
";

pub(crate) const CLICK_TEMPLATE_EN: &str = "You are a search engine user with your own profile. Your task is to click on the most relevant page.

In this interaction, you raised the question of **{query}**. You have received several webpage titles returned by the search engine.

Now, based on your profile, web browsing history, and the relevance between the query and the titles, please choose the most relevant webpage to click on. Please note that you can only output one number from 1 to 10 to represent the title you are about to click on, and cannot output any other content

** Your Profile **
{profile}

** Web browsing (click) history **
{scratchpad}

** Query **
{query}

** Titles **
{titles}

** Your click **
";

pub(crate) const QUERY_TEMPLATE_ZH: &str = "您是一位带有自己档案的搜索引擎用户。您的任务是与搜索引擎互动{max_exceeds_times}次。您有两种操作可以执行：

- Search[查询]：在当前轮次未达到{max_exceeds_times}次时，请同时参考网页浏览历史和档案提出下一个查询。你需要考虑的是：1、在参考网页浏览历史时，查询的主题不能过多偏离历史中的交互内容，保持主题的连贯性；2、在参考档案时，查询的主题要和档案中的某属性相关，但要有发散思维，不要限制在这些具体属性上，尤其注意查询不要过多的涉及地名。

最后，您的查询应该是一个实体短语，保持简洁明了。这里有一些该操作的例子，如Search[优酷客户端下载], Search[无敌铁桥三], Search[蜡笔小新], Search[百度云网盘资源]。

- Finish[finish]：在当前轮次超过{max_exceeds_times}次时，您需要结束与搜索引擎的互动。例如，Finish[finish]。

** 您的档案 **
{profile}

** 网页浏览（点击）历史 **
{scratchpad}

** 您的操作 **
";

pub(crate) const CLICK_TEMPLATE_ZH: &str = "您是一位带有自己档案的搜索引擎用户。您的任务是点击最相关的页面。

在这次互动中，您提出了**{query}**的查询。您已经收到了搜索引擎返回的几个网页标题。

现在，请根据您的档案、网页浏览历史以及查询和标题之间的相关性，选择最相关的网页进行点击（语义相关或者是词语相似度高）。请注意，请首先输出你选择该title的理由，然后输出一个 **数字** （1到10）来代表您即将点击的标题，例如我会选择Title x: xxxx, 因为xxx。

** 您的档案 **
{profile}

** 网页浏览（点击）历史 **
{scratchpad}

** 查询 **
{query}

** 标题 **
{titles}

** 您的点击 **
";

/// Renders the profile as labeled attribute lines in the prompt language.
pub fn render_profile(profile: &UserProfile) -> String {
    match profile.language_setting {
        Language::English => format!(
            "Age: {}\nGender: {}\nEducation: {}\nCareer: {}\nPersonality: {}\nInterest: {}\nLocation: {}\nWealth: {}",
            profile.age,
            profile.gender,
            profile.education,
            profile.career,
            profile.personality,
            profile.interest,
            profile.location,
            profile.wealth
        ),
        Language::Chinese => format!(
            "年龄: {}\n性别: {}\n教育: {}\n职业: {}\n性格: {}\n兴趣: {}\n地点: {}\n财富: {}",
            profile.age,
            profile.gender,
            profile.education,
            profile.career,
            profile.personality,
            profile.interest,
            profile.location,
            profile.wealth
        ),
    }
}

/// Renders the browsing history as numbered `(query → clicked title)` lines,
/// or the literal `None` when no round has completed yet.
pub fn render_scratchpad(scratchpad: &Scratchpad) -> String {
    if scratchpad.entries.is_empty() {
        return "None".to_string();
    }
    scratchpad
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| format!("{}. ({} → {})", i + 1, e.query, e.clicked_title))
        .collect::<Vec<_>>()
        .join("\n")
}

fn render_titles(results: &[SearchResult]) -> String {
    results
        .iter()
        .map(|r| format!("Title {}: {}", r.rank, r.title))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Builds the query-behavior prompt for the next round.
pub fn render_query_prompt(
    profile: &UserProfile,
    scratchpad: &Scratchpad,
    max_rounds: usize,
    language: Language,
) -> String {
    let template = match language {
        Language::English => QUERY_TEMPLATE_EN,
        Language::Chinese => QUERY_TEMPLATE_ZH,
    };
    template
        .replace("{max_exceeds_times}", &max_rounds.to_string())
        .replace("{profile}", &render_profile(profile))
        .replace("{scratchpad}", &render_scratchpad(scratchpad))
}

/// Builds the click-behavior prompt for one result page. The engine skips the
/// click step on empty result pages, so an empty `results` is a caller bug.
pub fn render_click_prompt(
    profile: &UserProfile,
    scratchpad: &Scratchpad,
    query: &str,
    results: &[SearchResult],
    language: Language,
) -> Result<String, super::SimulationError> {
    if results.is_empty() || results.len() > 10 {
        return Err(super::SimulationError::BadResultPage(results.len()));
    }
    let template = match language {
        Language::English => CLICK_TEMPLATE_EN,
        Language::Chinese => CLICK_TEMPLATE_ZH,
    };
    Ok(template
        .replace("{profile}", &render_profile(profile))
        .replace("{scratchpad}", &render_scratchpad(scratchpad))
        .replace("{query}", query)
        .replace("{titles}", &render_titles(results)))
}
