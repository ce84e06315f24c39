use crate::data::{Catalog, CandidateSet, Session};
use crate::error::Result;
use crate::llm::{parse_ranked_list, render_hint_prompt, ChatTurn, Domain, LlmGateway, PromptText, RankedOutput};

/// One-shot next-item recommendation through the gateway: render the basic or
/// hint-enhanced prompt, send it, parse the reply against the candidates.
#[derive(Clone, Copy)]
pub struct Recommender<'a> {
    pub gateway: &'a LlmGateway,
    pub catalog: &'a Catalog,
    pub domain: Domain,
}

impl<'a> Recommender<'a> {
    pub fn new(gateway: &'a LlmGateway, catalog: &'a Catalog, domain: Domain) -> Self {
        Self { gateway, catalog, domain }
    }

    pub fn prompt(&self, session: &Session, candidates: &CandidateSet, hint: Option<&str>) -> Result<PromptText> {
        render_hint_prompt(session, candidates, self.catalog, self.domain, hint.unwrap_or(""))
    }

    pub fn rank(&self, session: &Session, candidates: &CandidateSet, hint: Option<&str>) -> Result<RankedOutput> {
        Ok(self.rank_traced(session, candidates, hint)?.1)
    }

    pub fn rank_traced(
        &self,
        session: &Session,
        candidates: &CandidateSet,
        hint: Option<&str>,
    ) -> Result<(PromptText, RankedOutput)> {
        let prompt = self.prompt(session, candidates, hint)?;
        let reply = self.gateway.complete_chat(&[ChatTurn::user(prompt.text.clone())])?;
        let ranked = parse_ranked_list(&reply, candidates, self.catalog);
        Ok((prompt, ranked))
    }
}
