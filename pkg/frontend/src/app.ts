/** DOM wiring: join form, live cue feed, pinned review panel.
 *
 * Cues render as transient cards in a vertical feed, newest last; pinned
 * cues live in a separate side panel so scrolling never loses them. There
 * are no modal interruptions anywhere.
 */

import { CueFeedClient, ClientCue, FeedItem } from './client.js'

const LANGUAGES = ['en', 'hi', 'sw', 'fr', 'ta', 'pt-BR']

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag)
  if (className) node.className = className
  if (text !== undefined) node.textContent = text
  return node
}

export function mountApp(root: HTMLElement, client = new CueFeedClient()): void {
  root.innerHTML = ''

  // -- join form --
  const form = el('form', 'join-form')
  const urlInput = el('input')
  urlInput.placeholder = 'http://127.0.0.1:8765'
  urlInput.value = location.origin.startsWith('http') ? location.origin : 'http://127.0.0.1:8765'
  const sessionInput = el('input')
  sessionInput.placeholder = 'session id'
  const langSelect = el('select')
  for (const lang of LANGUAGES) {
    const option = el('option', undefined, lang)
    option.value = lang
    langSelect.append(option)
  }
  const joinButton = el('button', 'join', 'Join')
  joinButton.type = 'submit'
  form.append(urlInput, sessionInput, langSelect, joinButton)
  form.onsubmit = (event) => {
    event.preventDefault()
    if (sessionInput.value.trim()) {
      client.join(urlInput.value.trim(), sessionInput.value.trim(), langSelect.value)
    }
  }

  const status = el('div', 'status', 'not connected')
  const columns = el('div', 'columns')
  const feed = el('div', 'feed')
  const panel = el('aside', 'pinned-panel')
  const panelTitle = el('h2', undefined, 'Pinned')
  const pinnedList = el('div', 'pinned-list')
  const exportButton = el('button', 'export', 'Export list')
  exportButton.onclick = () => {
    const blob = new Blob([client.exportPinned() + '\n'], { type: 'text/plain' })
    const link = el('a')
    link.href = URL.createObjectURL(blob)
    link.download = 'pinned-terms.txt'
    link.click()
    URL.revokeObjectURL(link.href)
  }
  panel.append(panelTitle, pinnedList, exportButton)
  columns.append(feed, panel)
  root.append(form, status, columns)

  const renderCard = (cue: ClientCue): HTMLElement => {
    const card = el('article', 'cue-card')
    card.dataset.cueId = String(cue.cueId)
    if (cue.retracted) card.classList.add('retracted')
    if (client.isKnown(cue.termId)) card.classList.add('known')
    const head = el('header')
    head.append(el('strong', 'term', cue.canonical))
    head.append(el('span', 'lang', cue.fallback === 'none' ? cue.langUsed : `${cue.langUsed || '—'} (fallback)`))
    const body = el('p', 'explanation', cue.explanation || '(no explanation in your language yet)')
    const actions = el('div', 'actions')
    const pinButton = el('button', 'pin', cue.pinned ? 'Unpin' : 'Pin')
    pinButton.onclick = () => (cue.pinned ? client.unpin(cue.cueId) : client.pin(cue.cueId))
    const knownButton = el('button', 'known', 'I know this')
    knownButton.disabled = client.isKnown(cue.termId)
    knownButton.onclick = () => {
      knownButton.disabled = true
      client.markKnown(cue.termId).catch(() => {
        knownButton.disabled = false // retry affordance; nothing hidden
        knownButton.textContent = 'I know this (retry)'
      })
    }
    actions.append(pinButton, knownButton)
    card.append(head, body, actions)
    return card
  }

  const renderItem = (item: FeedItem): HTMLElement => {
    if (item.kind === 'gap') {
      return el('div', 'gap-notice', `some cues were skipped — resuming at #${item.nextCueId}`)
    }
    return renderCard(item.cue)
  }

  const render = () => {
    status.textContent =
      client.status === 'live'
        ? `live as ${client.clientId} (${client.language})`
        : client.status + (client.lastError ? ` — ${client.lastError}` : '')
    status.dataset.state = client.status

    feed.innerHTML = ''
    for (const item of client.feedItems()) {
      const cue = item.kind === 'cue' ? item.cue : null
      if (cue && client.isKnown(cue.termId)) continue // greyed out of the live feed
      feed.append(renderItem(item))
    }
    feed.scrollTop = feed.scrollHeight

    pinnedList.innerHTML = ''
    for (const cue of client.pinnedCues()) {
      const row = el('div', 'pinned-row')
      row.append(el('strong', undefined, cue.canonical))
      row.append(el('span', undefined, ' ' + cue.explanation))
      const unpin = el('button', 'unpin', '✕')
      unpin.onclick = () => client.unpin(cue.cueId)
      row.append(unpin)
      pinnedList.append(row)
    }
  }

  client.onChange(render)
  render()
}

declare global {
  interface Window {
    lexicueClient?: CueFeedClient
  }
}

if (typeof document !== 'undefined' && document.getElementById('app')) {
  const client = new CueFeedClient()
  window.lexicueClient = client
  mountApp(document.getElementById('app') as HTMLElement, client)
}
