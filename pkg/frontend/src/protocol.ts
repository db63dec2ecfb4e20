/** Subscriber wire protocol: one JSON object per WebSocket frame. */

export interface HelloMessage {
  type: 'hello'
  lang: string
  resume_from: number | null
  client_id?: string | null
}

export interface SuppressMessage {
  type: 'suppress'
  term_id: number
}

export type ClientMessage = HelloMessage | SuppressMessage

export interface WelcomeMessage {
  type: 'welcome'
  client_id: string
  session_id: string
  glossary_version: string
  cue_count: number
}

export interface CueMessage {
  type: 'cue'
  cue_id: number
  term_id: number
  canonical: string
  utterance_id: number
  first_token: number
  last_token: number
  start_ms: number
  end_ms: number
  exact: boolean
  lang_used: string
  fallback: 'none' | 'english' | 'term_only'
  explanation: string
}

export interface GapMessage {
  type: 'gap'
  next_cue_id: number
}

export interface SuppressAckMessage {
  type: 'suppress_ack'
  term_id: number
}

export interface RetractMessage {
  type: 'retract'
  cue_id: number
  term_id: number
  utterance_id: number
}

export interface ErrorMessage {
  type: 'error'
  error: string
  detail?: string
}

export type ServerMessage =
  | WelcomeMessage
  | CueMessage
  | GapMessage
  | SuppressAckMessage
  | RetractMessage
  | ErrorMessage

export function parseServerMessage(raw: string): ServerMessage | null {
  let data: unknown
  try {
    data = JSON.parse(raw)
  } catch {
    return null
  }
  if (typeof data !== 'object' || data === null) return null
  const type = (data as { type?: unknown }).type
  if (
    type === 'welcome' ||
    type === 'cue' ||
    type === 'gap' ||
    type === 'suppress_ack' ||
    type === 'retract' ||
    type === 'error'
  ) {
    return data as ServerMessage
  }
  return null
}

/** ws:// endpoint for a session's subscribe stream, from an http(s) base URL. */
export function subscribeUrl(baseUrl: string, sessionId: string): string {
  const url = new URL(baseUrl)
  url.protocol = url.protocol === 'https:' ? 'wss:' : 'ws:'
  url.pathname = `${url.pathname.replace(/\/$/, '')}/sessions/${sessionId}/subscribe`
  return url.toString()
}
