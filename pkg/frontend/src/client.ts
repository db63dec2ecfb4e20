/** Connection and feed state for one student in one lecture session.
 *
 * Owns the subscribe socket, keeps the cue feed in cue_id order (duplicates
 * from a resume overlap are dropped), reconnects automatically with
 * resume_from = last seen cue_id, and keeps suppression server-authoritative:
 * a term is only treated as known once the suppress_ack arrives.
 */

import {
  CueMessage,
  GapMessage,
  HelloMessage,
  ServerMessage,
  parseServerMessage,
  subscribeUrl,
} from './protocol.js'

export interface SocketLike {
  send(data: string): void
  close(): void
  onopen: ((event?: unknown) => void) | null
  onmessage: ((event: { data: unknown }) => void) | null
  onclose: ((event?: unknown) => void) | null
  onerror: ((event?: unknown) => void) | null
}

export type SocketFactory = (url: string) => SocketLike

export interface ClientCue {
  cueId: number
  termId: number
  canonical: string
  explanation: string
  langUsed: string
  fallback: 'none' | 'english' | 'term_only'
  exact: boolean
  startMs: number
  receivedAt: number
  pinned: boolean
  retracted: boolean
}

export type FeedItem =
  | { kind: 'cue'; cue: ClientCue }
  | { kind: 'gap'; nextCueId: number }

export type ClientStatus = 'idle' | 'connecting' | 'live' | 'reconnecting' | 'closed'

export interface ClientOptions {
  socketFactory?: SocketFactory
  /** Delay before reconnect attempt n (1-based); injectable for tests. */
  reconnectDelayMs?: (attempt: number) => number
  now?: () => number
  maxReconnectAttempts?: number
}

interface PendingSuppress {
  termId: number
  resolve: () => void
  reject: (err: Error) => void
}

const defaultFactory: SocketFactory = (url) => {
  if (typeof WebSocket === 'undefined') {
    throw new Error('no WebSocket implementation; pass options.socketFactory')
  }
  return new WebSocket(url) as unknown as SocketLike
}

export class CueFeedClient {
  private readonly factory: SocketFactory
  private readonly delayFor: (attempt: number) => number
  private readonly now: () => number
  private readonly maxAttempts: number

  private socket: SocketLike | null = null
  private items: FeedItem[] = []
  private cuesById = new Map<number, ClientCue>()
  private pinOrder: number[] = []
  private known = new Set<number>()
  private pending: PendingSuppress[] = []
  private listeners = new Set<() => void>()
  private reconnectAttempts = 0
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null
  private leaving = false

  status: ClientStatus = 'idle'
  lastError: string | null = null
  clientId: string | null = null
  lastCueId = 0

  private baseUrl = ''
  private sessionId = ''
  language = ''

  constructor(options: ClientOptions = {}) {
    this.factory = options.socketFactory ?? defaultFactory
    this.delayFor = options.reconnectDelayMs ?? ((attempt) => Math.min(500 * attempt, 5000))
    this.now = options.now ?? Date.now
    this.maxAttempts = options.maxReconnectAttempts ?? 20
  }

  // -- lifecycle --

  join(baseUrl: string, sessionId: string, language: string): void {
    this.leave()
    this.leaving = false
    this.baseUrl = baseUrl
    this.sessionId = sessionId
    this.language = language
    this.reconnectAttempts = 0
    this.open(null)
  }

  leave(): void {
    this.leaving = true
    if (this.reconnectTimer !== null) {
      clearTimeout(this.reconnectTimer)
      this.reconnectTimer = null
    }
    if (this.socket) {
      const socket = this.socket
      this.socket = null
      socket.onclose = null
      socket.close()
    }
    this.failPending('connection closed')
    if (this.status !== 'idle') this.setStatus('closed')
  }

  private open(resumeFrom: number | null): void {
    this.setStatus(this.reconnectAttempts > 0 ? 'reconnecting' : 'connecting')
    let socket: SocketLike
    try {
      socket = this.factory(subscribeUrl(this.baseUrl, this.sessionId))
    } catch (err) {
      this.lastError = String(err)
      this.scheduleReconnect()
      return
    }
    this.socket = socket
    socket.onopen = () => {
      const hello: HelloMessage = {
        type: 'hello',
        lang: this.language,
        resume_from: resumeFrom,
        client_id: this.clientId,
      }
      socket.send(JSON.stringify(hello))
    }
    socket.onmessage = (event) => {
      const message = parseServerMessage(String(event.data))
      if (message) this.handle(message)
    }
    socket.onclose = () => {
      if (this.socket === socket) this.socket = null
      this.failPending('connection lost')
      if (!this.leaving) this.scheduleReconnect()
    }
    socket.onerror = () => {
      // onclose follows; nothing to do here
    }
  }

  private scheduleReconnect(): void {
    if (this.leaving || this.reconnectTimer !== null) return
    this.reconnectAttempts += 1
    if (this.reconnectAttempts > this.maxAttempts) {
      this.setStatus('closed')
      return
    }
    this.setStatus('reconnecting')
    this.reconnectTimer = setTimeout(() => {
      this.reconnectTimer = null
      if (!this.leaving) this.open(this.lastCueId)
    }, this.delayFor(this.reconnectAttempts))
  }

  // -- message handling --

  private handle(message: ServerMessage): void {
    switch (message.type) {
      case 'welcome':
        this.clientId = message.client_id
        this.reconnectAttempts = 0
        this.lastError = null
        this.setStatus('live')
        break
      case 'cue':
        this.acceptCue(message)
        break
      case 'gap':
        this.acceptGap(message)
        break
      case 'suppress_ack': {
        this.known.add(message.term_id)
        const index = this.pending.findIndex((p) => p.termId === message.term_id)
        if (index >= 0) {
          const [settled] = this.pending.splice(index, 1)
          settled.resolve()
        }
        this.notify()
        break
      }
      case 'retract': {
        const cue = this.cuesById.get(message.cue_id)
        if (cue) {
          cue.retracted = true
          this.notify()
        }
        break
      }
      case 'error': {
        this.lastError = message.detail ?? message.error
        const oldest = this.pending.shift()
        if (oldest) oldest.reject(new Error(this.lastError))
        this.notify()
        break
      }
    }
  }

  private acceptCue(message: CueMessage): void {
    // strictly increasing cue_ids keep display order == cue_id order and
    // make resume replays idempotent
    if (message.cue_id <= this.lastCueId) return
    if (this.known.has(message.term_id)) {
      this.lastCueId = message.cue_id
      return
    }
    const cue: ClientCue = {
      cueId: message.cue_id,
      termId: message.term_id,
      canonical: message.canonical,
      explanation: message.explanation,
      langUsed: message.lang_used,
      fallback: message.fallback,
      exact: message.exact,
      startMs: message.start_ms,
      receivedAt: this.now(),
      pinned: false,
      retracted: false,
    }
    this.lastCueId = message.cue_id
    this.cuesById.set(cue.cueId, cue)
    this.items.push({ kind: 'cue', cue })
    this.notify()
  }

  private acceptGap(message: GapMessage): void {
    this.items.push({ kind: 'gap', nextCueId: message.next_cue_id })
    this.notify()
  }

  // -- student actions --

  /** Mark a term as known; resolves only on the server's ack. */
  markKnown(termId: number): Promise<void> {
    if (!this.socket || this.status !== 'live') {
      return Promise.reject(new Error('not connected; try again'))
    }
    const socket = this.socket
    return new Promise<void>((resolve, reject) => {
      this.pending.push({ termId, resolve, reject })
      try {
        socket.send(JSON.stringify({ type: 'suppress', term_id: termId }))
      } catch (err) {
        this.pending = this.pending.filter((p) => p.resolve !== resolve)
        reject(err instanceof Error ? err : new Error(String(err)))
      }
    })
  }

  pin(cueId: number): void {
    const cue = this.cuesById.get(cueId)
    if (!cue || cue.pinned) return
    cue.pinned = true
    this.pinOrder.push(cueId)
    this.notify()
  }

  unpin(cueId: number): void {
    const cue = this.cuesById.get(cueId)
    if (!cue || !cue.pinned) return
    cue.pinned = false
    this.pinOrder = this.pinOrder.filter((id) => id !== cueId)
    this.notify()
  }

  /** Plain-text export of the pinned list: term<TAB>explanation per line. */
  exportPinned(): string {
    return this.pinnedCues()
      .map((cue) => `${cue.canonical}\t${cue.explanation}`)
      .join('\n')
  }

  // -- views --

  feedItems(): readonly FeedItem[] {
    return this.items
  }

  cues(): ClientCue[] {
    return this.items.flatMap((item) => (item.kind === 'cue' ? [item.cue] : []))
  }

  pinnedCues(): ClientCue[] {
    return this.pinOrder
      .map((id) => this.cuesById.get(id))
      .filter((cue): cue is ClientCue => cue !== undefined)
  }

  isKnown(termId: number): boolean {
    return this.known.has(termId)
  }

  onChange(listener: () => void): () => void {
    this.listeners.add(listener)
    return () => this.listeners.delete(listener)
  }

  private setStatus(status: ClientStatus): void {
    this.status = status
    this.notify()
  }

  private failPending(reason: string): void {
    const pending = this.pending
    this.pending = []
    for (const p of pending) p.reject(new Error(reason))
  }

  private notify(): void {
    for (const listener of this.listeners) listener()
  }
}
